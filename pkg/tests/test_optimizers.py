import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pnsearch.core import CoolingSchedule
from pnsearch.errors import AbsorbingStateError, ConfigurationError
from pnsearch.optimizers import (Algorithm, OptRunConfig, PartialNeighborSampler, PnsStrategy,
                                 SubsetMethod, draw_partial_neighbors, evaluations_per_step,
                                 jump_probabilities, round_half_up, run_optimizer, run_pns,
                                 run_rf, run_sa, run_tabu_rf, write_trace_csv)
from pnsearch.problems import (KnapsackInstance, KnapsackModel, QuboModel, SimplexQpModel,
                               generate_3r3xor, generate_knapsack, generate_qubo,
                               generate_simplex_qp, model_for, toy_local_max)

GEO = CoolingSchedule.geometric(10, 0.1, 2)


def qubo(n=12, seed=0):
    return QuboModel(generate_qubo(n, np.random.default_rng(seed)))


def cfg(alg, iters, **kw):
    return OptRunConfig(Algorithm(alg), kw.pop("schedule", GEO).with_steps(iters), iters, **kw)


def test_round_half_up():
    assert [round_half_up(x) for x in (0.5, 1.5, 2.5, 2.4999)] == [1, 2, 3, 2]


@pytest.mark.parametrize("frac,n,size", [("1/4", 12, 3), (0.5, 12, 6), (0.01, 12, 1),
                                         ("3/4", 10, 8), (1, 7, 7)])
def test_subset_size(frac, n, size):
    assert PnsStrategy(SubsetMethod.A, frac).subset_size(n) == size


@pytest.mark.parametrize("bad", [0, 1.5, -0.2, "x"])
def test_bad_fraction(bad):
    with pytest.raises((ConfigurationError, ValueError)):
        PnsStrategy(SubsetMethod.A, bad)


def test_method_a_draws_fresh_distinct_subsets():
    s = PartialNeighborSampler(PnsStrategy("A", 0.25), 12, np.random.default_rng(0))
    subsets = [tuple(sorted(s.draw(k))) for k in range(50)]
    assert all(len(set(sub)) == 3 for sub in subsets)
    assert len(set(subsets)) > 30


def test_method_b_refreshes_every_ten_steps():
    s = PartialNeighborSampler(PnsStrategy("B", 0.25), 12, np.random.default_rng(0))
    subsets = [tuple(s.draw(k)) for k in range(30)]
    for block in range(3):
        assert len(set(subsets[10 * block:10 * block + 10])) == 1
    assert len(set(subsets)) > 1


def test_methods_c_d_use_the_two_halves():
    for method, period in (("C", 1), ("D", 10)):
        s = PartialNeighborSampler(PnsStrategy(method, 0.5), 12, np.random.default_rng(1))
        seen = {tuple(s.draw(k)) for k in range(200)}
        assert seen == {tuple(range(6)), tuple(range(6, 12))}
        assert PnsStrategy(method, 0.5).refresh_period == period


def test_custom_partition_must_cover():
    bad = PnsStrategy("C", 0.5, partition=([0, 1], [2]))
    with pytest.raises(ConfigurationError):
        bad.blocks(4)
    good = PnsStrategy("C", 0.5, partition=([0, 3], [1, 2]))
    assert [b.tolist() for b in good.blocks(4)] == [[0, 3], [1, 2]]


@settings(max_examples=50)
@given(st.integers(1, 40), st.sampled_from(["1/4", "1/2", "3/4", "1"]), st.integers(0, 50),
       st.integers(0, 2**32 - 1))
def test_standalone_draw_properties(n, frac, k, seed):
    strat = PnsStrategy("A", frac)
    sub = draw_partial_neighbors(strat, n, k, np.random.default_rng(seed))
    assert len(sub) == strat.subset_size(n)
    assert len(set(sub.tolist())) == len(sub)
    assert sub.min() >= 0 and sub.max() < n


def test_full_fraction_pns_equals_rf():
    model = qubo()
    rf = run_rf(model, cfg("rf", 300), 5)
    pns = run_pns(model, cfg("pns", 300, pns=PnsStrategy("A", 1)), 5)
    assert rf.state_ids == pns.state_ids
    assert rf.evaluations == pns.evaluations


def test_rf_never_stays_put():
    tr = run_rf(qubo(), cfg("rf", 200), 3)
    assert all(a != b for a, b in zip(tr.state_ids, tr.state_ids[1:]))


def test_rf_jump_frequencies_match_closed_form():
    model = toy_local_max(10)
    probs = jump_probabilities(model, 0, 1.0)
    assert probs[0] == pytest.approx(1 / (1 + 0.0001 * 10), abs=1e-12)
    hits = 0
    for seed in range(3000):
        tr = run_rf(model, cfg("rf", 1, schedule=CoolingSchedule.constant(1.0)), seed)
        hits += tr.state_ids[1] == "B"
    assert abs(hits / 3000 - probs[0]) < 4 * np.sqrt(probs[0] * (1 - probs[0]) / 3000) + 1e-3


def test_pns_moves_only_inside_subset():
    model = qubo()
    tr = run_pns(model, cfg("pns", 200, pns=PnsStrategy("C", 0.5)), 4)
    assert tr.evaluations == 200 * 6
    assert tr.n_candidates[1:] == [6] * 200


def test_sa_best_is_monotone_and_traced():
    model = qubo()
    tr = run_sa(model, cfg("sa", 2000), 1)
    assert tr.evaluations == 2000 and len(tr.steps) == 2001
    assert tr.best_log_target == max(tr.log_targets)
    assert tr.log_targets[tr.steps_to_best] == tr.best_log_target
    assert model.log_target(tr.best_state) == pytest.approx(tr.best_log_target)


def test_zero_iterations_returns_initial_state():
    model = qubo()
    for alg, extra in (("sa", {}), ("rf", {}), ("pns", {"pns": PnsStrategy()}),
                       ("tabu", {"tabu_length": 2})):
        tr = run_optimizer(model, cfg(alg, 0, **extra), 1)
        assert tr.best_value == 0.0 and tr.steps_to_best == 0 and tr.evaluations == 0


def test_tabu_never_returns_to_recent_states():
    model = qubo()
    length = 3
    tr = run_tabu_rf(model, cfg("tabu", 300, tabu_length=length), 2)
    ids = tr.state_ids
    for k in range(1, len(ids)):
        assert ids[k] not in ids[max(0, k - length):k]


def test_tabu_length_zero_is_rf():
    model = qubo()
    a = run_tabu_rf(model, cfg("tabu", 100, tabu_length=0), 8)
    b = run_rf(model, cfg("rf", 100), 8)
    assert a.state_ids == b.state_ids


def test_target_stops_early():
    inst = generate_3r3xor(8, np.random.default_rng(3))
    model = model_for(inst)
    tr = run_rf(model, cfg("rf", 10_000, schedule=CoolingSchedule.constant(1.0),
                           target=model.optimum), 0)
    assert tr.reached_target and tr.best_value == 8
    assert tr.iterations_run < 10_000
    assert tr.evaluations_to_target == tr.iterations_run * 8
    planted = run_rf(model, cfg("rf", 100, target=model.optimum), 0,
                     initial_state=inst.planted_bits)
    assert planted.reached_target and planted.iterations_run == 0


def test_evaluation_accounting():
    model = qubo()
    pns = PnsStrategy("A", 0.25)
    assert evaluations_per_step(model, cfg("sa", 1)) == 1
    assert evaluations_per_step(model, cfg("rf", 1)) == 12
    assert evaluations_per_step(model, cfg("pns", 1, pns=pns)) == 3
    assert evaluations_per_step(model, cfg("tabu", 1, tabu_length=3)) == 12
    assert run_pns(model, cfg("pns", 50, pns=pns), 0).evaluations == 150


def test_knapsack_runs_stay_feasible():
    model = KnapsackModel(generate_knapsack(40, 4000, np.random.default_rng(2)))
    configs = [cfg("sa", 3000), cfg("rf", 100), cfg("pns", 300, pns=PnsStrategy("A", 0.25)),
               cfg("tabu", 100, tabu_length=3)]
    for c in configs:
        tr = run_optimizer(model, c, 1)
        for sid in tr.state_ids:
            assert model.feasible(model.decode(sid))
        assert tr.best_value > 0


def test_absorbing_state_is_reported():
    model = KnapsackModel(KnapsackInstance(3, 1, [5, 5, 5], [1, 1, 1]))
    with pytest.raises(AbsorbingStateError):
        run_rf(model, cfg("rf", 5), 0)
    with pytest.raises(AbsorbingStateError):
        run_pns(model, cfg("pns", 5, pns=PnsStrategy("A", 0.5)), 0)


def test_continuous_problem_support():
    model = SimplexQpModel(generate_simplex_qp(8, np.random.default_rng(1)))
    pns = run_pns(model, cfg("pns", 200, pns=PnsStrategy(candidates=20)), 0)
    assert pns.evaluations == 200 * 20
    assert abs(pns.best_state.sum() - 1.0) < 1e-9
    sa = run_sa(model, cfg("sa", 4000), 0)
    assert abs(sa.best_state.sum() - 1.0) < 1e-9
    with pytest.raises(ConfigurationError):
        run_rf(model, cfg("rf", 10), 0)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        cfg("pns", 10)
    with pytest.raises(ConfigurationError):
        cfg("tabu", 10)
    with pytest.raises(ConfigurationError):
        cfg("sa", -1)


def test_trace_file_is_reproducible(tmp_path):
    model = qubo()
    for k, seed in enumerate((3, 3)):
        tr = run_pns(model, cfg("pns", 100, pns=PnsStrategy("A", 0.25)), seed)
        write_trace_csv(tmp_path / f"t{k}.csv", tr)
    assert (tmp_path / "t0.csv").read_bytes() == (tmp_path / "t1.csv").read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "t0.csv")))
    assert len(rows) == 101 and rows[0]["wall_time_cumulative"] == ""
