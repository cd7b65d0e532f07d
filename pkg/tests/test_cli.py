import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pnsearch.cli import main
from pnsearch.problems import ising_energy, load_instance

FIXTURES = Path(__file__).parent / "fixtures"


def run_cli(capsys, *args):
    code = main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


def best_line(out):
    last = out.strip().splitlines()[-1].split()
    assert last[0] == "BEST" and last[2] == "STEPS"
    return float(last[1]), int(last[3])


def test_generate_qubo(capsys, tmp_path):
    out_path = tmp_path / "q.json"
    code, out, _ = run_cli(capsys, "generate", "--kind", "qubo", "--n", 200, "--seed", 7,
                           "--out", out_path)
    assert code == 0
    inst = load_instance(out_path)
    assert inst.q.shape == (200, 200) and np.all(np.tril(inst.q, -1) == 0)
    code, out2, _ = run_cli(capsys, "generate", "--kind", "qubo", "--n", 200, "--seed", 7,
                            "--out", tmp_path / "q2.json")
    assert out.splitlines()[0] == out2.splitlines()[0]


def test_generate_ising_has_planted_optimum(capsys, tmp_path):
    path = tmp_path / "i.json"
    code, out, _ = run_cli(capsys, "generate", "--kind", "ising3xor", "--n", 12, "--seed", 1,
                           "--out", path)
    assert code == 0 and "planted_energy=12" in out
    inst = load_instance(path)
    assert ising_energy(inst, inst.planted) == 12


def test_run_pinned_instance_reaches_oracle(capsys):
    oracle = json.loads((FIXTURES / "qubo12_oracle.json").read_text())
    code, out, _ = run_cli(capsys, "run", "--instance", FIXTURES / "qubo12.json", "--alg", "pns",
                           "--fraction", "0.25", "--schedule", "geometric:10:0.1", "--iters",
                           1000, "--seed", 1)
    assert code == 0
    best, _ = best_line(out)
    assert best == pytest.approx(oracle["optimum"], rel=1e-12)


def test_run_zero_iterations(capsys):
    code, out, _ = run_cli(capsys, "run", "--instance", FIXTURES / "qubo12.json", "--alg", "rf",
                           "--iters", 0, "--seed", 3)
    assert code == 0 and best_line(out) == (0.0, 0)


def test_run_without_seed_echoes_one(capsys):
    code, out, _ = run_cli(capsys, "run", "--instance", FIXTURES / "qubo12.json", "--alg", "sa",
                           "--iters", 10)
    assert code == 0 and out.startswith("SEED ")


def test_trace_bytes_identical_and_input_untouched(capsys, tmp_path):
    before = (FIXTURES / "qubo12.json").read_bytes()
    for name in ("a.csv", "b.csv"):
        run_cli(capsys, "run", "--instance", FIXTURES / "qubo12.json", "--alg", "tabu",
                "--tabu-length", 2, "--iters", 50, "--seed", 9, "--trace", tmp_path / name)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (FIXTURES / "qubo12.json").read_bytes() == before


@pytest.mark.parametrize("args", [
    ["run", "--instance", "x.json", "--alg", "rf", "--iters", "1", "--bogus"],
    ["run", "--instance", str(FIXTURES / "qubo12.json"), "--alg", "ga", "--iters", "1"],
    ["run", "--instance", str(FIXTURES / "qubo12.json"), "--alg", "sa", "--iters", "1",
     "--schedule", "linear:3"],
    ["run", "--instance", str(FIXTURES / "qubo12.json"), "--alg", "pns", "--iters", "1",
     "--fraction", "2"],
    ["bench", "--kind", "qubo", "--n", "5", "--out", "x"],
    ["tts", "--out", "x"],
    ["generate", "--kind", "tsp", "--n", "3", "--seed", "1", "--out", "x"],
])
def test_config_errors_exit_2(capsys, args):
    assert main(args) == 2


def test_missing_file_exits_3(capsys, tmp_path):
    assert main(["run", "--instance", str(tmp_path / "none.json"), "--alg", "rf",
                 "--iters", "1", "--seed", "1"]) == 3


def test_absorbing_state_exits_4(capsys, tmp_path):
    path = tmp_path / "k.json"
    path.write_text(json.dumps({"schema_version": 1, "kind": "knapsack", "n": 2, "capacity": 1,
                                "weights": [5, 5], "values": [1, 1]}))
    assert main(["run", "--instance", str(path), "--alg", "rf", "--iters", "3",
                 "--seed", "1"]) == 4


def test_bench_and_report(capsys, tmp_path):
    prefix = tmp_path / "fig2"
    code, out, _ = run_cli(capsys, "bench", "--kind", "qubo", "--n", 12, "--alg", "sa",
                           "--alg", "rf", "--alg", "pns:1/4", "--reps", 3, "--budget", 1200,
                           "--seed", 5, "--out", prefix)
    assert code == 0 and "COMPLETED 3 OF 3" in out
    with open(f"{prefix}_samples.csv") as fh:
        header = next(csv.reader(fh))
    assert {"schedule", "algorithm", "repetition", "best"} <= set(header)

    one = tmp_path / "one"
    run_cli(capsys, "bench", "--kind", "qubo", "--n", 8, "--alg", "rf", "--reps", 2,
            "--budget", 100, "--seed", 1, "--out", one)
    code, out, _ = run_cli(capsys, "report", f"{one}_samples.csv", "--out", tmp_path / "p.csv")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "p.csv")))
    assert len(rows) == 1 and rows[0]["algorithm"] == "rf"


def test_bench_from_spec_file(capsys, tmp_path):
    spec = {"problem": {"kind": "knapsack", "n": 20, "params": {"capacity": 2000}},
            "algorithms": ["sa", "tabu:2"], "repetitions": 2, "budget": 400}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    code, out, _ = run_cli(capsys, "bench", "--spec", path, "--seed", 4, "--out", tmp_path / "k")
    assert code == 0 and "tabu:2" in out


def test_tts_four_rows(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "tts", "--sizes", 8, "--instances", 4, "--budget", 50_000,
                           "--seed", 3, "--out", tmp_path / "tts")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "tts_summary.csv")))
    assert sorted(r["algorithm"] for r in rows) == ["pns:1/2", "pns:1/4", "pns:3/4", "rf"]
    code, out, _ = run_cli(capsys, "report", tmp_path / "tts_samples.csv")
    assert code == 0 and out.count("pns:") == 3


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "pnsearch", "run", "--instance",
                          str(FIXTURES / "qubo12.json"), "--alg", "rf", "--iters", "5",
                          "--seed", "2"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip().splitlines()[-1].startswith("BEST ")
