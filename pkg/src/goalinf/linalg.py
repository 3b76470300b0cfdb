"""Dense symmetric linear algebra: Cholesky, the generalized symmetric-definite
eigensolver, range projectors, Schur complements and Matrix Market IO.

Every approximation in the package is assembled from these pieces. Inputs are
plain ``numpy`` arrays; :class:`SpdMatrix` adds a lazily cached Cholesky factor
for covariances that are factorized repeatedly.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric, RankDeficient

SYMMETRY_TOL = 1e-8
RANK_TOL = 1e-12


def symmetrize(M, name="matrix"):
    """Return ``(M + M.T) / 2`` after checking the asymmetry is only round-off."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    scale = np.linalg.norm(M)
    if scale > 0 and np.linalg.norm(M - M.T) > SYMMETRY_TOL * scale:
        raise NotSymmetric(f"{name} is not symmetric")
    return 0.5 * (M + M.T)


def chol(M):
    """Lower Cholesky factor ``L`` with ``L @ L.T == M``.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is not strictly positive. No jitter is ever added.
    """
    if isinstance(M, SpdMatrix):
        return M.cholesky
    M = symmetrize(M)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if not np.all(np.diag(L) > 0):
        raise NotPositiveDefinite("non-positive Cholesky pivot")
    return L


class SpdMatrix:
    """Symmetric positive definite matrix with a once-only cached Cholesky factor.

    The factor is computed on first access under a lock, so instances can be
    shared between threads after construction.
    """

    __slots__ = ("array", "_chol", "_lock")

    def __init__(self, array):
        self.array = symmetrize(array)
        self.array.setflags(write=False)
        self._chol = None
        self._lock = threading.Lock()

    @property
    def shape(self):
        return self.array.shape

    @property
    def dim(self):
        return self.array.shape[0]

    @property
    def cholesky(self):
        if self._chol is None:
            with self._lock:
                if self._chol is None:
                    L = chol(self.array)
                    L.setflags(write=False)
                    self._chol = L
        return self._chol

    def solve(self, b):
        L = self.cholesky
        return solve_triangular(L.T, solve_triangular(L, b, lower=True), lower=False)

    def logdet(self):
        return 2.0 * float(np.sum(np.log(np.diag(self.cholesky))))

    def __array__(self, dtype=None, copy=None):
        return self.array if dtype is None else self.array.astype(dtype)

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


def as_array(M):
    return M.array if isinstance(M, SpdMatrix) else np.asarray(M, dtype=float)


def as_spd(M):
    return M if isinstance(M, SpdMatrix) else SpdMatrix(M)


def spd_solve(M, b):
    return as_spd(M).solve(b)


def logdet_spd(M):
    return as_spd(M).logdet()


@dataclass(frozen=True)
class EigPairs:
    """Eigenpairs sorted by descending value; ``vectors`` holds them as columns."""

    values: np.ndarray
    vectors: np.ndarray
    normalization: str = "B-orthonormal"

    def __len__(self):
        return len(self.values)

    def leading(self, k):
        return EigPairs(self.values[:k], self.vectors[:, :k], self.normalization)


def _sort_descending(values, vectors):
    order = np.argsort(-values, kind="stable")
    return values[order], vectors[:, order]


def generalized_eigh(A, B):
    """All eigenpairs of the pencil ``A v = sigma B v``.

    Reduces with ``B = L L^T`` to the standard problem for ``L^{-1} A L^{-T}``
    and maps eigenvectors back through ``v = L^{-T} u``, so the returned vectors
    are B-orthonormal.

    Parameters
    ----------
    A : ndarray, shape (m, m)
        Symmetric matrix (symmetrized defensively).
    B : ndarray or SpdMatrix, shape (m, m)
        Symmetric positive definite matrix.

    Returns
    -------
    EigPairs
        Values in descending order with B-orthonormal eigenvectors.
    """
    A = symmetrize(A, "A")
    Bm = as_spd(B)
    if A.shape != Bm.shape:
        raise DimensionMismatch(f"pencil shapes differ: {A.shape} vs {Bm.shape}")
    L = Bm.cholesky
    C = solve_triangular(L, A, lower=True)
    C = solve_triangular(L, C.T, lower=True)
    values, U = np.linalg.eigh(0.5 * (C + C.T))
    V = solve_triangular(L.T, U, lower=False)
    values, V = _sort_descending(values, V)
    return EigPairs(values, V, "B-orthonormal")


class RangeProjector:
    """Orthogonal projector onto ``range(Mt)`` for a full-column-rank ``Mt``.

    ``apply(v)`` returns ``Mt @ x_ls`` where ``x_ls`` solves the overdetermined
    system ``Mt x = v`` in the least-squares sense (via a thin QR).
    """

    def __init__(self, Mt):
        Mt = np.asarray(Mt, dtype=float)
        if Mt.ndim == 1:
            Mt = Mt[:, None]
        n, p = Mt.shape
        if p > n:
            raise RankDeficient(f"{p} columns cannot be independent in R^{n}")
        Q, R = np.linalg.qr(Mt, mode="reduced")
        diag = np.abs(np.diag(R))
        if p and diag.min() < RANK_TOL * diag.max():
            raise RankDeficient("matrix does not have full column rank")
        self.Mt = Mt
        self.Q = Q
        self.R = R

    def least_squares(self, v):
        return solve_triangular(self.R, self.Q.T @ v, lower=False)

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.Mt.shape[0]:
            raise DimensionMismatch(f"vector length {v.shape[0]} != {self.Mt.shape[0]}")
        return self.Mt @ self.least_squares(v)


def range_projector_apply(Mt, v):
    """Project ``v`` (a vector or a matrix of column vectors) onto ``range(Mt)``."""
    return RangeProjector(Mt).apply(v)


def schur_complements(Sigma, split):
    """Schur complements of the partition ``[[A, B], [B^T, C]]`` of ``Sigma``.

    Returns ``(S_of_A, S_of_C)`` with ``S(A) = C - B^T A^{-1} B`` and
    ``S(C) = A - B C^{-1} B^T``, where ``A`` is the leading ``split x split``
    block.
    """
    Sigma = symmetrize(Sigma, "Sigma")
    m = Sigma.shape[0]
    if not 0 < split < m:
        raise DimensionMismatch(f"split must lie in (0, {m}), got {split}")
    A = Sigma[:split, :split]
    B = Sigma[:split, split:]
    C = Sigma[split:, split:]
    S_A = C - B.T @ spd_solve(A, B)
    S_C = A - B @ spd_solve(C, B.T)
    return SpdMatrix(S_A), SpdMatrix(S_C)


def read_mtx(path, squeeze=True):
    """Read a dense Matrix Market file; single columns come back one-dimensional
    unless ``squeeze`` is false."""
    M = scipy.io.mmread(str(path))
    if hasattr(M, "toarray"):
        M = M.toarray()
    M = np.asarray(M, dtype=float)
    if squeeze and M.ndim == 2 and M.shape[1] == 1:
        return M[:, 0]
    return M


def write_mtx(path, M, symmetric=False, comment=""):
    """Write ``M`` in Matrix Market array format (``general`` or ``symmetric``)."""
    M = as_array(M)
    if M.ndim == 1:
        M = M[:, None]
    if symmetric:
        M = symmetrize(M)
    scipy.io.mmwrite(
        str(Path(path)),
        M,
        comment=comment,
        field="real",
        precision=17,
        symmetry="symmetric" if symmetric else "general",
    )
