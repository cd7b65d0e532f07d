"""Simulated annealing, rejection-free chains and partial neighbour search."""

__version__ = "0.1.0"
