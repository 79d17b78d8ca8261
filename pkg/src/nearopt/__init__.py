"""Optimal and near-optimal solutions of a random chain optimization problem."""
__version__ = "0.1.0"
