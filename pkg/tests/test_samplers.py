import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from pnsearch.core import CoolingSchedule
from pnsearch.errors import AbsorbingStateError
from pnsearch.problems import GraphModel, complete_graph_model, toy_local_max
from pnsearch.samplers import (ChainTrace, jump_collapse, run_metropolis,
                               run_rejection_free_sampling, weighted_expectation,
                               write_chain_csv)


def test_jump_collapse_worked_example():
    rec = jump_collapse(list("abbbaaccccdda"))
    assert rec.jump_states == list("abacda")
    assert rec.multiplicities.tolist() == [1, 3, 2, 4, 2, 1]


@given(st.lists(st.sampled_from("abc"), min_size=1, max_size=40))
def test_jump_collapse_properties(seq):
    rec = jump_collapse(seq)
    assert rec.multiplicities.sum() == len(seq)
    assert all(x != y for x, y in zip(rec.jump_states, rec.jump_states[1:]))
    expanded = [s for s, m in zip(rec.jump_states, rec.multiplicities) for _ in range(m)]
    assert expanded == seq


def test_jump_collapse_empty():
    with pytest.raises(ValueError):
        jump_collapse([])


def test_single_neighbor_alternates():
    m = complete_graph_model([1.0, 1.0], labels=["a", "b"])
    tr = run_metropolis(m, 6, rng=0)
    assert tr.states == list("abababa")


def test_metropolis_matches_exact_kernel():
    # one-step transition frequencies from each state versus the exact kernel
    pi = [1.0, 3.0, 2.0, 5.0]
    m = GraphModel([[1, 2], [0, 2, 3], [0, 1], [1]], np.log(pi))
    p = m.metropolis_kernel()
    tr = run_metropolis(m, 200_000, rng=4)
    idx = [m.node(s) for s in tr.states]
    counts = np.zeros((4, 4))
    np.add.at(counts, (idx[:-1], idx[1:]), 1)
    for x in range(4):
        expected = counts[x].sum() * p[x]
        keep = expected > 0
        res = stats.chisquare(counts[x][keep], expected[keep])
        assert res.pvalue > 1e-3
    occupancy = np.bincount(idx, minlength=4) / len(idx)
    np.testing.assert_allclose(occupancy, np.array(pi) / sum(pi), atol=0.01)


def test_rejection_free_jump_law_matches_kernel():
    pi = [1.0, 3.0, 2.0, 5.0]
    m = GraphModel([[1, 2], [0, 2, 3], [0, 1], [1]], np.log(pi))
    p = m.metropolis_kernel()
    rec = run_rejection_free_sampling(m, 100_000, rng=6)
    idx = [m.node(s) for s in rec.jump_states] + [m.node(rec.final_state)]
    for k, x in enumerate(idx[:-1][:50]):
        assert rec.escape_probs[k] == pytest.approx(1.0 - p[x, x], rel=1e-12)
    counts = np.zeros((4, 4))
    np.add.at(counts, (idx[:-1], idx[1:]), 1)
    for x in range(4):
        off = p[x].copy()
        off[x] = 0.0
        expected = counts[x].sum() * off / off.sum()
        keep = expected > 0
        assert counts[x][~keep].sum() == 0
        if keep.sum() > 1:
            assert stats.chisquare(counts[x][keep], expected[keep]).pvalue > 1e-3


def test_weighted_expectation_targets_pi():
    pi = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    m = complete_graph_model(pi)
    rec = run_rejection_free_sampling(m, 50_000, rng=2)
    h = lambda s: float(int(s) ** 2)
    exact = float((np.arange(6) ** 2) @ pi / pi.sum())
    assert weighted_expectation(rec, h) == pytest.approx(exact, abs=0.1)


def test_absorbing_state_raises():
    m = GraphModel([[1], [0]], [0.0, -np.inf], initial=0)
    with pytest.raises(AbsorbingStateError):
        run_rejection_free_sampling(m, 3, rng=0)


def test_annealed_metropolis_freezes_at_low_temperature():
    m = toy_local_max(5)
    tr = run_metropolis(m, 2000, CoolingSchedule.constant(0.01), rng=1, hastings=False)
    # spokes are 1e4 times less likely than the hubs, so no spoke is ever entered
    assert set(tr.states) <= {"A", "B"}


def test_same_seed_same_chain():
    m = toy_local_max(4)
    a = run_metropolis(m, 500, rng=9)
    b = run_metropolis(m, 500, rng=9)
    assert a.states == b.states


def test_chain_csv(tmp_path):
    m = toy_local_max(3)
    rec = run_rejection_free_sampling(m, 20, rng=1)
    path = tmp_path / "c.csv"
    write_chain_csv(path, rec)
    rows = list(csv.DictReader(open(path)))
    assert [r["state_id"] for r in rows] == rec.jump_states
    assert [int(r["multiplicity"]) for r in rows] == rec.multiplicities.tolist()
    write_chain_csv(path, ChainTrace(["A", "B"], np.array([0.0, 1.0])))
    assert len(list(csv.DictReader(open(path)))) == 2
