import json
import math

import pytest

from pnsearch.bench import (AlgorithmSpec, BudgetMode, ExperimentSpec, ProblemSpec,
                            TtsSpec, important_neighbors, load_manifest, quantiles, read_samples,
                            rerun_from_manifest, run_experiment, summarize_to_files,
                            time_to_solution)
from pnsearch.errors import ConfigurationError
from pnsearch.optimizers import Algorithm
from pnsearch.problems import GraphModel, complete_graph_model, toy_local_max


def small_spec(**kw):
    base = dict(problem=ProblemSpec("qubo", 10), algorithms=("sa", "rf", "pns:1/4"),
                repetitions=4, base_seed=11, budget=600, instances=2)
    base.update(kw)
    return ExperimentSpec(**base)


def test_quantile_convention():
    assert quantiles([1, 2, 3, 4]) == (1.75, 2.5, 3.25)


@pytest.mark.parametrize("token,alg", [("sa", Algorithm.SA), ("rf", Algorithm.RF),
                                       ("pns:1/4", Algorithm.PNS), ("pns:0.5:B", Algorithm.PNS),
                                       ("tabu:3", Algorithm.TABU)])
def test_algorithm_tokens(token, alg):
    assert AlgorithmSpec.parse(token).algorithm is alg


@pytest.mark.parametrize("token", ["ga", "pns:2", "tabu", "tabu:x", "pns:1/2:E", "sa:1"])
def test_bad_algorithm_tokens(token):
    with pytest.raises(ConfigurationError):
        AlgorithmSpec.parse(token)


def test_spec_round_trip():
    spec = small_spec(schedules=("constant:1", "geometric:10:0.1"))
    again = ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again.to_dict() == spec.to_dict()


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        small_spec(repetitions=0)
    with pytest.raises(ConfigurationError):
        small_spec(schedules=("linear:1",))


def test_single_run_summary():
    s = run_experiment(small_spec(algorithms=("sa",), repetitions=1, instances=1))
    row = s.table()[0]
    assert row["count"] == 1 and row["mean"] == s.samples[0]["best"]
    assert row["q25"] == row["q50"] == row["q75"] == row["mean"]


def test_summary_shape_and_order():
    s = run_experiment(small_spec())
    assert len(s.samples) == 2 * 4 * 3 and s.completed == 8
    for row in s.table():
        assert row["count"] == 8
        assert row["q25"] <= row["q50"] <= row["q75"]


def test_evaluation_matching():
    s = run_experiment(small_spec())
    by_run: dict = {}
    for r in s.samples:
        by_run.setdefault((r["instance"], r["repetition"]), []).append(r["evaluations"])
    for evals in by_run.values():
        # one RF step evaluates 10 neighbours
        assert max(evals) - min(evals) <= 10
        assert max(evals) <= 600


def test_step_matching():
    s = run_experiment(small_spec(budget_mode=BudgetMode.STEP, budget=50))
    assert {r["iterations"] for r in s.samples} == {50}


def test_adding_repetitions_keeps_earlier_runs():
    a = run_experiment(small_spec(repetitions=2))
    b = run_experiment(small_spec(repetitions=4))
    keep = [r for r in b.samples if r["repetition"] < 2]
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]
    assert strip(keep) == strip(a.samples)


def test_files_round_trip_and_rerun(tmp_path):
    s = run_experiment(small_spec())
    paths = summarize_to_files(s, tmp_path / "out" / "exp")
    rows = read_samples(paths["samples"])
    assert [r["best"] for r in rows] == [r["best"] for r in s.samples]
    manifest = load_manifest(paths["manifest"])
    assert manifest["base_seed"] == 11 and manifest["spec"]["base_seed"] == 11
    again = rerun_from_manifest(paths["manifest"])
    p2 = summarize_to_files(again, tmp_path / "again")
    assert p2["samples"].read_bytes() == paths["samples"].read_bytes()


def test_failures_are_logged_and_counted(caplog):
    spec = small_spec(problem=ProblemSpec("knapsack", 5, {"capacity": 1.0}),
                      algorithms=("rf",), repetitions=2, instances=1)
    s = run_experiment(spec)
    assert s.completed == 0 and len(s.failures) == 2
    assert "failed" in caplog.text


def test_unwritable_prefix(tmp_path):
    s = run_experiment(small_spec(repetitions=1, instances=1))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        summarize_to_files(s, blocker / "sub" / "x")


def test_important_neighbors_cases():
    flat = complete_graph_model([1.0] * 5)
    assert important_neighbors(flat, 0, 1.0).tolist() == [0, 1, 2, 3]
    dominated = GraphModel([[1, 2], [0], [0]], [0.0, 0.0, -20.5])
    assert important_neighbors(dominated, 0, 1.0).tolist() == [0]
    toy = toy_local_max(10)
    assert important_neighbors(toy, 0, 1.0).tolist() == list(range(11))
    # at lower temperature the spokes fall below the threshold
    assert important_neighbors(toy, 0, 0.5).tolist() == [0]


def test_tts_summary():
    spec = TtsSpec(sizes=(8,), algorithms=("rf", "pns:1/2"), instances=6, base_seed=2,
                   budget=200_000)
    s = time_to_solution(spec)
    table = s.table()
    assert len(table) == 2
    for row in table:
        assert row["solved"] + row["timeouts"] == row["runs"] == 6
    assert all(r["evaluations"] > 0 for r in s.samples if r["solved"])


def test_tts_timeouts_are_not_errors():
    spec = TtsSpec(sizes=(12,), algorithms=("rf",), instances=3, base_seed=2, budget=12)
    row = time_to_solution(spec).table()[0]
    assert row["timeouts"] >= 2
    assert row["solved"] > 0 or math.isnan(row["median_evaluations"])
