"""Optimal and naive low-rank approximations of goal-oriented posteriors.

Two spectra drive everything:

* :func:`param_spectrum` -- eigenpairs ``(delta^2, w)`` of ``(H, Gamma_pr^{-1})``,
  giving the optimal prior-to-posterior update of the parameter covariance and,
  pushed through ``O``, the naive QoI approximation;
* :func:`goal_spectrum` -- eigenpairs ``(lambda, q)`` of
  ``(G Gamma_pr O^T Gamma_Z^{-1} O Gamma_pr G^T, Gamma_Y)``, giving the optimal
  QoI covariance update, the goal-oriented parameter covariance, a
  non-symmetric square root for sampling and the optimal low-rank mean map.

Approximate covariances are kept as :class:`LowRankUpdateCov` (base minus a
weighted low-rank term); call :meth:`LowRankUpdateCov.dense` to densify.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEigenvalue, DimensionMismatch, RankTooLarge
from .linalg import RangeProjector, as_array, generalized_eigh
from .model import qoi_prior_cov

DROP_TOL = 1e-12
ONE_TOL = 1e-14


@dataclass(frozen=True)
class ParamSpectrum:
    """``deltas_sq`` descending; ``w`` has Gamma_pr^{-1}-orthonormal columns."""

    deltas_sq: np.ndarray
    w: np.ndarray

    def __len__(self):
        return len(self.deltas_sq)


@dataclass(frozen=True)
class GoalSpectrum:
    """Goal-oriented eigenvalues in (0, 1), descending, and direction families.

    ``q`` (d x k) are the pencil eigenvectors; ``q_hat = O Gamma_pr G^T q``
    (p x k); ``q_bar = Pi S_pr^T G^T q`` (n x k); ``q_tilde = S_pr q_bar``.
    """

    lambdas: np.ndarray
    q: np.ndarray
    q_hat: np.ndarray
    q_bar: np.ndarray
    q_tilde: np.ndarray

    def __len__(self):
        return len(self.lambdas)


@dataclass(frozen=True)
class LowRankUpdateCov:
    """Covariance ``base - directions @ diag(weights) @ directions.T``."""

    base: np.ndarray
    directions: np.ndarray
    weights: np.ndarray

    @property
    def rank(self):
        return len(self.weights)

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        coef = self.directions.T @ x
        coef *= self.weights[:, None] if x.ndim == 2 else self.weights
        return self.base @ x - self.directions @ coef

    def dense(self):
        D = self.directions
        return self.base - (D * self.weights) @ D.T


@dataclass(frozen=True)
class MeanMap:
    """Rank-r linear map ``A = left @ right.T`` from data to QoI space."""

    left: np.ndarray
    right: np.ndarray

    @property
    def rank(self):
        return self.left.shape[1]

    def apply(self, y):
        """Map one data vector (d,) or a batch of rows (N, d)."""
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            return self.left @ (self.right.T @ y)
        return (y @ self.right) @ self.left.T

    def dense(self):
        return self.left @ self.right.T


def _check_rank(r, available):
    if r < 0 or r > available:
        raise RankTooLarge(f"rank {r} requested but only {available} pairs available")


def _check_lambdas(lambdas):
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas >= 1.0 - ONE_TOL):
        raise DegenerateEigenvalue("eigenvalue numerically equal to 1")
    return lambdas


def param_spectrum(pb, k_max=None):
    """Leading eigenpairs of ``(H, Gamma_pr^{-1})``.

    Computed from the standard eigendecomposition of ``Gh^T Gh`` with the
    whitened forward map ``Gh = S_obs^{-1} G S_pr``; eigenvectors ``u`` map to
    ``w = S_pr u``.
    """
    k_max = pb.n if k_max is None else k_max
    if not 0 <= k_max <= pb.n:
        raise DimensionMismatch(f"k_max={k_max} must lie in [0, n={pb.n}]")
    Gh = pb.whitened_forward()
    values, U = np.linalg.eigh(Gh.T @ Gh)
    order = np.argsort(-values, kind="stable")[:k_max]
    deltas_sq = np.clip(values[order], 0.0, None)
    return ParamSpectrum(deltas_sq, pb.S_pr @ U[:, order])


def param_opt_cov(sp, pb, r):
    """Optimal rank-r update ``Gamma_pr - sum delta^2/(1+delta^2) w w^T``."""
    _check_rank(r, len(sp))
    d2 = sp.deltas_sq[:r]
    return LowRankUpdateCov(pb.Gamma_pr.array, sp.w[:, :r], d2 / (1.0 + d2))


def param_opt_error(sp, r):
    """Förstner distance between Gamma_pos and its optimal rank-r approximation."""
    tail = sp.deltas_sq[r:]
    return float(np.sqrt(0.5 * np.sum(np.log1p(tail) ** 2)))


def naive_qoi_cov(pb, sp, r):
    """``O (optimal parameter approximation) O^T``, dense p x p."""
    approx = param_opt_cov(sp, pb, r)
    OD = pb.O @ approx.directions
    return pb.O @ pb.Gamma_pr.array @ pb.O.T - (OD * approx.weights) @ OD.T


def goal_spectrum(pb, k_max=None, drop_tol=DROP_TOL):
    """Goal-oriented eigenpairs through the whitened pencil
    ``(Gh Pi Gh^T, I + Gh Gh^T)``, ``Pi`` the projector onto ``range(S_pr^T O^T)``.

    Eigenvectors ``w`` map to ``q = S_obs^{-T} w`` and are rescaled so that
    ``q^T (G Gamma_pr O^T Gamma_Z^{-1} O Gamma_pr G^T) q = 1``. Pairs with
    ``lambda <= drop_tol`` are discarded.
    """
    k_cap = min(pb.p, pb.d)
    k_max = k_cap if k_max is None else k_max
    if not 0 <= k_max <= k_cap:
        raise DimensionMismatch(f"k_max={k_max} must lie in [0, min(p, d)={k_cap}]")
    Gh = pb.whitened_forward()
    proj = RangeProjector(pb.S_pr.T @ pb.O.T)
    # Pi = Q Q^T, so Gh Pi Gh^T = (Q^T Gh^T)^T (Q^T Gh^T)
    QtGt = proj.Q.T @ Gh.T
    A = QtGt.T @ QtGt
    B = np.eye(pb.d) + Gh @ Gh.T
    pairs = generalized_eigh(A, B)
    keep = pairs.values > drop_tol
    lambdas = pairs.values[keep][:k_max]
    W = pairs.vectors[:, keep][:, :k_max]
    # B-orthonormal gives w^T A w = lambda
    W = W / np.sqrt(lambdas)
    q = np.linalg.solve(pb.S_obs.T, W)
    GtQ = pb.G.T @ q
    q_hat = pb.O @ (pb.Gamma_pr.array @ GtQ)
    q_bar = proj.apply(pb.S_pr.T @ GtQ)
    q_tilde = pb.S_pr @ q_bar
    return GoalSpectrum(lambdas, q, q_hat, q_bar, q_tilde)


def optimal_qoi_cov(gs, pb, r):
    """Optimal rank-r approximation ``Gamma_Z - sum lambda q_hat q_hat^T``."""
    _check_rank(r, len(gs))
    return LowRankUpdateCov(qoi_prior_cov(pb).array, gs.q_hat[:, :r], gs.lambdas[:r])


def optimal_qoi_error(gs, r):
    """Förstner distance between Gamma_{Z|Y} and the optimal rank-r approximation."""
    tail = _check_lambdas(gs.lambdas[r:])
    return float(np.sqrt(0.5 * np.sum(np.log1p(-tail) ** 2)))


def goal_param_cov(gs, pb, r):
    """Goal-oriented parameter covariance ``Gamma_pr - sum lambda q_tilde q_tilde^T``.

    Its pushforward through ``O`` is exactly :func:`optimal_qoi_cov`.
    """
    _check_rank(r, len(gs))
    return LowRankUpdateCov(pb.Gamma_pr.array, gs.q_tilde[:, :r], gs.lambdas[:r])


def qoi_sqrt(gs, pb, r):
    """Non-symmetric p x n square root ``S`` with ``S S^T`` equal to the optimal
    rank-r QoI covariance."""
    _check_rank(r, len(gs))
    lam = _check_lambdas(gs.lambdas[:r])
    Qb = gs.q_bar[:, :r]
    OS = pb.O @ pb.S_pr
    return OS + ((OS @ Qb) * (np.sqrt(1.0 - lam) - 1.0)) @ Qb.T


def mean_map(gs, r):
    """Bayes-risk optimal rank-r map ``sum lambda q_hat q^T``."""
    _check_rank(r, len(gs))
    return MeanMap(gs.q_hat[:, :r] * gs.lambdas[:r], gs.q[:, :r])


def predicted_bayes_risk(gs, r, dim_constant):
    """``sum_{i>r} lambda/(1-lambda) + dim_constant``.

    The Monte Carlo risk of the full-rank map equals the QoI dimension ``p``,
    so pass ``pb.p`` for a risk prediction; pass ``pb.n`` to reproduce the
    constant printed alongside the optimality result.
    """
    tail = _check_lambdas(gs.lambdas[r:])
    return float(np.sum(tail / (1.0 - tail)) + dim_constant)


def predicted_mean_error(gs, r):
    """Tail ``sum_{i>r} lambda/(1-lambda)``: expected squared error of the rank-r
    mean map in the posterior-precision norm."""
    return predicted_bayes_risk(gs, r, 0.0)


def densify(cov):
    return cov.dense() if isinstance(cov, LowRankUpdateCov) else as_array(cov)
