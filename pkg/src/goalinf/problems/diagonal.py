"""Diagonal denoising problem with closed-form spectra."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, SingularNoise
from ..model import GoalProblem

EPS_H = 1e-8


def diagonal_precisions(n, eps_h=EPS_H):
    """Noise precisions ``h_i = n - i``; the last one (zero) becomes ``eps_h``."""
    if eps_h <= 0:
        raise SingularNoise(f"h_{n} = 0 makes the noise covariance singular")
    h = np.arange(n - 1, -1, -1, dtype=float)
    h[-1] = eps_h
    return h


def diagonal_problem(n=30, p=15, eps_h=EPS_H):
    """``G = I``, ``Gamma_obs^{-1} = diag(n - i)``, ``Gamma_pr = diag(i)`` and
    ``O`` selecting the first ``p`` coordinates (``i = 1..n``)."""
    if not 0 < p < n:
        raise DimensionMismatch(f"need 0 < p < n, got p={p}, n={n}")
    h = diagonal_precisions(n, eps_h)
    mu = np.arange(1, n + 1, dtype=float)
    O = np.eye(n)[:p]
    return GoalProblem.create(
        np.eye(n),
        O,
        S_obs=np.diag(1.0 / np.sqrt(h)),
        S_pr=np.diag(np.sqrt(mu)),
        meta={"provenance": f"builtin:diagonal n={n} p={p}", "h": h, "mu": mu},
    )
