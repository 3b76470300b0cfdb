"""Goal-oriented linear-Gaussian model and its exact (dense) posterior.

The model is

    Y = G X + eps,   X ~ N(0, Gamma_pr),   eps ~ N(0, Gamma_obs),   Z = O X,

and everything here is computed directly with Cholesky solves. These routines
are the ground truth that the low-rank approximations are tested against.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, RankDeficient
from .linalg import (
    RANK_TOL,
    SpdMatrix,
    as_spd,
    read_mtx,
    spd_solve,
    write_mtx,
)

SQRT_TOL = 1e-10


@dataclass(frozen=True)
class Gaussian:
    """Gaussian with either a dense covariance or a square-root factor ``S``
    (covariance ``S @ S.T``, ``S`` possibly non-square)."""

    mean: np.ndarray
    cov: SpdMatrix | None = None
    factor: np.ndarray | None = None

    def __post_init__(self):
        if (self.cov is None) == (self.factor is None):
            raise ValueError("give exactly one of cov or factor")
        dim = self.cov.dim if self.cov is not None else self.factor.shape[0]
        if len(self.mean) != dim:
            raise DimensionMismatch("covariance dimension does not match the mean")

    @property
    def dim(self):
        return len(self.mean)

    def dense_cov(self):
        if self.cov is not None:
            return self.cov.array
        return self.factor @ self.factor.T


@dataclass(frozen=True, eq=False)
class GoalProblem:
    """Forward map ``G`` (d x n), noise and prior covariances with their square
    roots, and a full-row-rank goal operator ``O`` (p x n). Prior mean is zero.

    Build instances with :meth:`create`, which fills in missing square roots
    by Cholesky and validates every invariant.
    """

    G: np.ndarray
    Gamma_obs: SpdMatrix
    S_obs: np.ndarray
    Gamma_pr: SpdMatrix
    S_pr: np.ndarray
    O: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        G,
        O,
        Gamma_obs=None,
        Gamma_pr=None,
        S_obs=None,
        S_pr=None,
        meta=None,
        allow_square_goal=False,
    ):
        G = np.array(G, dtype=float, ndmin=2)
        O = np.array(O, dtype=float, ndmin=2)
        d, n = G.shape
        p = O.shape[0]
        if O.shape[1] != n:
            raise DimensionMismatch(f"O has {O.shape[1]} columns, G has {n}")
        if not allow_square_goal and p >= n:
            raise DimensionMismatch(f"goal dimension p={p} must be smaller than n={n}")
        _check_full_row_rank(O)

        Gamma_obs, S_obs = _cov_and_root(Gamma_obs, S_obs, d, "obs")
        Gamma_pr, S_pr = _cov_and_root(Gamma_pr, S_pr, n, "pr")
        for name, M in (("G", G), ("O", O)):
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} has non-finite entries")
        for M in (G, O, S_obs, S_pr):
            M.setflags(write=False)
        return cls(G, Gamma_obs, S_obs, Gamma_pr, S_pr, O, dict(meta or {}))

    @property
    def n(self):
        return self.G.shape[1]

    @property
    def d(self):
        return self.G.shape[0]

    @property
    def p(self):
        return self.O.shape[0]

    def whitened_forward(self):
        """``S_obs^{-1} G S_pr``."""
        return _solve_root(self.S_obs, self.G @ self.S_pr)


def _check_full_row_rank(O):
    R = np.linalg.qr(O.T, mode="r")
    diag = np.abs(np.diag(R))
    if O.shape[0] > O.shape[1] or diag.min() < RANK_TOL * diag.max():
        raise RankDeficient("goal operator O must have full row rank")


def _cov_and_root(cov, root, dim, label):
    if cov is None and root is None:
        raise ValueError(f"Gamma_{label} or S_{label} is required")
    if root is None:
        cov = as_spd(cov)
        root = np.array(cov.cholesky)
    else:
        root = np.array(root, dtype=float, ndmin=2)
        if cov is None:
            cov = SpdMatrix(root @ root.T)
        else:
            cov = as_spd(cov)
            err = np.linalg.norm(root @ root.T - cov.array)
            if err > SQRT_TOL * np.linalg.norm(cov.array):
                raise ValueError(f"S_{label} S_{label}^T does not reproduce Gamma_{label}")
    if cov.dim != dim or root.shape != (dim, dim):
        raise DimensionMismatch(f"Gamma_{label} must be {dim}x{dim}")
    return cov, root


def _solve_root(S, B):
    """``S^{-1} B`` using triangular solves when ``S`` is triangular."""
    if np.allclose(S, np.tril(S)):
        return solve_triangular(S, B, lower=True)
    if np.allclose(S, np.triu(S)):
        return solve_triangular(S, B, lower=False)
    return np.linalg.solve(S, B)


def _check_data(pb, y):
    y = np.asarray(y, dtype=float)
    if y.shape[0] != pb.d:
        raise DimensionMismatch(f"data length {y.shape[0]} != d={pb.d}")
    if not np.all(np.isfinite(y)):
        raise ValueError("data has non-finite entries")
    return y


def hessian(pb):
    """Data-misfit Hessian ``G^T Gamma_obs^{-1} G``."""
    return pb.G.T @ spd_solve(pb.Gamma_obs, pb.G)


def posterior_precision(pb):
    return hessian(pb) + spd_solve(pb.Gamma_pr, np.eye(pb.n))


def posterior_params(pb, y):
    """Exact parameter posterior ``N(mu_pos, Gamma_pos)``."""
    y = _check_data(pb, y)
    P = SpdMatrix(posterior_precision(pb))
    Gamma_pos = P.solve(np.eye(pb.n))
    mean = P.solve(pb.G.T @ spd_solve(pb.Gamma_obs, y))
    return Gaussian(mean, cov=SpdMatrix(Gamma_pos))


def posterior_qoi(pb, y):
    """Exact QoI posterior ``N(O mu_pos, O Gamma_pos O^T)``."""
    post = posterior_params(pb, y)
    return Gaussian(pb.O @ post.mean, cov=SpdMatrix(pb.O @ post.cov.array @ pb.O.T))


def posterior_qoi_cov(pb):
    return SpdMatrix(pb.O @ spd_solve(posterior_precision(pb), pb.O.T))


def posterior_mean_map(pb):
    """Dense p x d matrix ``O Gamma_pos G^T Gamma_obs^{-1}`` (oracle for the mean)."""
    P = posterior_precision(pb)
    return pb.O @ spd_solve(P, pb.G.T @ spd_solve(pb.Gamma_obs, np.eye(pb.d)))


def qoi_prior_cov(pb):
    """``Gamma_Z = O Gamma_pr O^T``."""
    return SpdMatrix(pb.O @ pb.Gamma_pr.array @ pb.O.T)


def data_marginal_cov(pb):
    """``Gamma_Y = Gamma_obs + G Gamma_pr G^T``."""
    return SpdMatrix(pb.Gamma_obs.array + pb.G @ pb.Gamma_pr.array @ pb.G.T)


def reduced_model(pb):
    """Data model driven by the QoI alone: ``Y = G O_dagger Z + Delta``.

    Returns ``O_dagger = Gamma_pr O^T Gamma_Z^{-1}`` and the covariance of the
    independent residual ``Delta``.
    """
    Gpr = pb.Gamma_pr.array
    Gamma_Z = qoi_prior_cov(pb)
    O_dagger = Gamma_Z.solve(pb.O @ Gpr).T
    residual = Gpr - Gpr @ pb.O.T @ Gamma_Z.solve(pb.O @ Gpr)
    Gamma_Delta = pb.Gamma_obs.array + pb.G @ residual @ pb.G.T
    return O_dagger, SpdMatrix(Gamma_Delta)


def joint_cov(pb):
    """Covariance of the stacked vector ``(Y, Z)``."""
    cross = pb.G @ pb.Gamma_pr.array @ pb.O.T
    return np.block(
        [[data_marginal_cov(pb).array, cross], [cross.T, qoi_prior_cov(pb).array]]
    )


def simulate(pb, x, rng):
    """Noisy observation ``G x + S_obs eps`` of a given parameter ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != pb.n:
        raise DimensionMismatch(f"parameter length {x.shape[0]} != n={pb.n}")
    eps = rng.standard_normal((pb.d,) + x.shape[1:])
    return pb.G @ x + pb.S_obs @ eps


def sample_joint(pb, rng, size=None):
    """Draw ``x ~ N(0, Gamma_pr)`` and return ``(O x, G x + noise)``.

    With ``size`` given, returns arrays of shape ``(size, p)`` and ``(size, d)``.
    """
    if size is None:
        x = pb.S_pr @ rng.standard_normal(pb.n)
        return pb.O @ x, simulate(pb, x, rng)
    X = pb.S_pr @ rng.standard_normal((pb.n, size))
    Y = pb.G @ X + pb.S_obs @ rng.standard_normal((pb.d, size))
    return (pb.O @ X).T, Y.T


def save_problem(pb, directory, provenance=""):
    """Serialize as ``G.mtx``, ``Gamma_obs.mtx``, ``S_pr.mtx``, ``O.mtx`` and
    ``problem.json``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_mtx(directory / "G.mtx", pb.G)
    write_mtx(directory / "Gamma_obs.mtx", pb.Gamma_obs, symmetric=True)
    write_mtx(directory / "S_pr.mtx", pb.S_pr)
    write_mtx(directory / "O.mtx", pb.O)
    meta = {
        "n": pb.n,
        "d": pb.d,
        "p": pb.p,
        "provenance": provenance or pb.meta.get("provenance", ""),
    }
    (directory / "problem.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_problem(directory):
    directory = Path(directory)
    meta = json.loads((directory / "problem.json").read_text())
    G = read_mtx(directory / "G.mtx", squeeze=False)
    O = read_mtx(directory / "O.mtx", squeeze=False)
    kwargs = {}
    if (directory / "S_pr.mtx").exists():
        kwargs["S_pr"] = read_mtx(directory / "S_pr.mtx", squeeze=False)
    else:
        kwargs["Gamma_pr"] = read_mtx(directory / "Gamma_pr.mtx", squeeze=False)
    Gamma_obs = read_mtx(directory / "Gamma_obs.mtx", squeeze=False)
    pb = GoalProblem.create(G, O, Gamma_obs=Gamma_obs, meta=meta, **kwargs)
    for key in ("n", "d", "p"):
        if key in meta and meta[key] != getattr(pb, key):
            raise DimensionMismatch(f"problem.json {key}={meta[key]} disagrees with matrices")
    return pb
