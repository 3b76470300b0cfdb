"""Optimal low-rank approximations for goal-oriented linear-Gaussian inverse problems."""

__version__ = "0.1.0"
