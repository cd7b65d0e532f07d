"""Benchmark problem families and the toy local-maximum graph."""

from .base import BinaryModel, BitFlipWalker, ProblemModel, Walker
from .graph import GraphModel, ToyLocalMaxInstance, complete_graph_model, toy_local_max
from .io import (digest, instance_from_dict, instance_kind, instance_to_dict, load_instance,
                 model_for, save_instance)
from .ising import (IsingXorInstance, IsingXorModel, count_violations, generate_3r3xor,
                    gf2_solve, ising_energy)
from .knapsack import (EMPTY_LOG_TARGET, KnapsackInstance, KnapsackModel, generate_knapsack,
                       knapsack_log_target)
from .qubo import (QuboInstance, QuboModel, generate_qubo, qubo_flip_delta, qubo_gains,
                   qubo_log_target)
from .simplex import (SimplexQpInstance, SimplexQpModel, generate_simplex_qp, simplex_log_target,
                      simplex_move, simplex_propose)

__all__ = [
    "ProblemModel", "Walker", "BinaryModel", "BitFlipWalker",
    "GraphModel", "ToyLocalMaxInstance", "toy_local_max", "complete_graph_model",
    "QuboInstance", "QuboModel", "generate_qubo", "qubo_log_target", "qubo_gains",
    "qubo_flip_delta",
    "KnapsackInstance", "KnapsackModel", "generate_knapsack", "knapsack_log_target",
    "EMPTY_LOG_TARGET",
    "IsingXorInstance", "IsingXorModel", "generate_3r3xor", "gf2_solve", "count_violations",
    "ising_energy",
    "SimplexQpInstance", "SimplexQpModel", "generate_simplex_qp", "simplex_log_target",
    "simplex_propose", "simplex_move",
    "instance_to_dict", "instance_from_dict", "instance_kind", "save_instance", "load_instance",
    "model_for", "digest",
]
