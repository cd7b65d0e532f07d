"""Instance files: versioned JSON with a kind tag.

Reals are written with ``repr`` precision, so a load reproduces every
float exactly; integer payloads are written as JSON integers.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .ising import IsingXorInstance, IsingXorModel
from .knapsack import KnapsackInstance, KnapsackModel
from .qubo import QuboInstance, QuboModel
from .simplex import SimplexQpInstance, SimplexQpModel

SCHEMA_VERSION = 1

KINDS = ("qubo", "knapsack", "ising3xor", "simplexqp")


def _numbers(arr) -> list:
    arr = np.asarray(arr)
    if arr.dtype.kind in "iu" or (arr.size and np.all(np.mod(arr, 1) == 0)
                                  and np.all(np.abs(arr) < 2 ** 53)):
        return [int(v) for v in arr.ravel()]
    return [float(v) for v in arr.ravel()]


def _upper(q: np.ndarray) -> list:
    return [float(v) for v in q[np.triu_indices(len(q))]]


def _from_upper(n: int, flat) -> np.ndarray:
    q = np.zeros((n, n))
    q[np.triu_indices(n)] = np.asarray(flat, dtype=float)
    return q


def instance_kind(inst) -> str:
    if isinstance(inst, QuboInstance):
        return "qubo"
    if isinstance(inst, KnapsackInstance):
        return "knapsack"
    if isinstance(inst, IsingXorInstance):
        return "ising3xor"
    if isinstance(inst, SimplexQpInstance):
        return "simplexqp"
    raise TypeError(f"unsupported instance type {type(inst).__name__}")


def instance_to_dict(inst) -> dict:
    kind = instance_kind(inst)
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "n": int(inst.n)}
    if kind == "qubo":
        doc["upper"] = _upper(inst.q)
    elif kind == "knapsack":
        doc["capacity"] = _numbers([inst.capacity])[0]
        doc["weights"] = _numbers(inst.weights)
        doc["values"] = _numbers(inst.values)
    elif kind == "ising3xor":
        doc["clauses"] = [[int(a), int(b), int(c), int(k)]
                          for (a, b, c), k in zip(inst.clauses, inst.coefficients)]
        doc["a_matrix"] = ["".join(str(int(v)) for v in row) for row in inst.a_matrix]
        doc["b_vector"] = [int(v) for v in inst.b_vector]
        doc["planted"] = [int(v) for v in inst.planted]
    else:
        doc["upper"] = _upper(inst.q)
        doc["step_sigma"] = float(inst.step_sigma)
    return doc


def instance_from_dict(doc: dict):
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported instance schema version {version!r}")
    kind, n = doc["kind"], int(doc["n"])
    if kind == "qubo":
        return QuboInstance(n, _from_upper(n, doc["upper"]))
    if kind == "knapsack":
        return KnapsackInstance(n, doc["capacity"], doc["weights"], doc["values"])
    if kind == "ising3xor":
        cl = np.asarray(doc["clauses"], dtype=np.int64).reshape(-1, 4)
        a = np.array([[int(ch) for ch in row] for row in doc["a_matrix"]], dtype=np.uint8)
        return IsingXorInstance(n, cl[:, :3], cl[:, 3], doc["planted"], a, doc["b_vector"])
    if kind == "simplexqp":
        return SimplexQpInstance(n, _from_upper(n, doc["upper"]), doc.get("step_sigma", 0.1))
    raise ValueError(f"unknown instance kind {kind!r}")


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def digest(doc: dict) -> str:
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()[:16]


def save_instance(inst, path) -> dict:
    doc = instance_to_dict(inst)
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    return doc


def load_instance(path):
    return instance_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def model_for(inst, knapsack_target: str = "linear"):
    """Wrap an instance in its :class:`ProblemModel`."""
    kind = instance_kind(inst)
    if kind == "knapsack":
        return KnapsackModel(inst, knapsack_target)
    return {"qubo": QuboModel, "ising3xor": IsingXorModel,
            "simplexqp": SimplexQpModel}[kind](inst)
