"""Distances between Gaussians and risk functionals."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import BetaOutOfRange, DimensionMismatch
from .linalg import as_array, as_spd, chol, generalized_eigh
from .model import posterior_qoi, posterior_qoi_cov, qoi_prior_cov, sample_joint


def forstner(G1, G2):
    """Affine-invariant geodesic distance ``sqrt(1/2 sum ln^2 sigma_i)`` on the
    SPD cone, ``sigma_i`` the eigenvalues of the pencil ``(G1, G2)``."""
    sigma = generalized_eigh(as_array(G1), as_spd(G2)).values
    if np.any(sigma <= 0):
        # G1 not positive definite
        chol(as_array(G1))
    return float(np.sqrt(0.5 * np.sum(np.log(sigma) ** 2)))


def mahalanobis(m1, m2, Gamma):
    diff = np.asarray(m1, dtype=float) - np.asarray(m2, dtype=float)
    Gamma = as_spd(Gamma)
    if diff.shape != (Gamma.dim,):
        raise DimensionMismatch(f"mean difference {diff.shape} vs covariance {Gamma.shape}")
    z = solve_triangular(Gamma.cholesky, diff, lower=True)
    return float(np.sqrt(z @ z))


def hellinger_truncation(lambdas, r):
    """Hellinger distance between the exact QoI posterior and its optimal rank-r
    approximation (same mean), from the discarded eigenvalues only."""
    tail = np.asarray(lambdas, dtype=float)[r:]
    log_prod = np.sum(0.5 * np.log(2.0) + 0.25 * np.log1p(-tail) - 0.5 * np.log(2.0 - tail))
    return float(np.sqrt(max(0.0, -np.expm1(log_prod))))


def hellinger_gaussian(mu, G1, G2):
    """Hellinger distance between ``N(mu, G1)`` and ``N(mu, G2)``.

    The determinant ratio ``|G1|^(1/4) |G2|^(1/4) / |(G1 + G2)/2|^(1/2)`` is
    evaluated through the eigenvalues ``sigma`` of the Cholesky-whitened pencil
    ``(G2, G1)`` as ``sum 1/4 ln sigma - 1/2 ln((1 + sigma)/2)``. Each term
    vanishes to second order in ``sigma - 1``, so nearly equal covariances do not
    suffer the cancellation of subtracting separate log-determinants.
    """
    del mu  # equal means: the distance depends on the covariances only
    A1, A2 = as_array(G1), as_array(G2)
    chol(A2)
    delta = generalized_eigh(A2, as_spd(A1)).values - 1.0
    log_ratio = np.sum(0.25 * np.log1p(delta) - 0.5 * np.log1p(0.5 * delta))
    return float(np.sqrt(max(0.0, -np.expm1(log_ratio))))


def empirical_bayes_risk(pb, A, N, rng, Gamma_post=None):
    """Monte Carlo estimate of ``E ||A Y - Z||^2`` weighted by the exact
    posterior precision of the QoI, with its standard error.

    ``A`` is a :class:`~goalinf.approx.MeanMap` or a dense p x d matrix.
    """
    if N < 100:
        raise ValueError("need at least 100 samples")
    Z, Y = sample_joint(pb, rng, size=N)
    AY = A.apply(Y) if hasattr(A, "apply") else Y @ np.asarray(A).T
    L = chol(Gamma_post if Gamma_post is not None else posterior_qoi_cov(pb))
    E = solve_triangular(L, (AY - Z).T, lower=True)
    losses = np.sum(E**2, axis=0)
    return float(losses.mean()), float(losses.std(ddof=1) / np.sqrt(N))


def expectation_bound_constant(pb, y, g_moment, beta):
    """Constant ``C(Y, g)`` bounding ``|E g - E~ g|`` by ``C`` times the Hellinger
    distance. ``g_moment`` is ``E_prior[|g|^beta]^(1/beta)``."""
    if beta <= 2:
        raise BetaOutOfRange(f"beta must exceed 2, got {beta}")
    Gamma_Z = qoi_prior_cov(pb)
    post = posterior_qoi(pb, y)
    log_det_ratio = Gamma_Z.logdet() - post.cov.logdet()
    m = mahalanobis(post.mean, np.zeros(pb.p), Gamma_Z)
    log_c = (
        1.5 * np.log(2.0)
        + 0.25 * log_det_ratio
        + m**2 / (2.0 * (beta - 2.0))
        + np.log(g_moment)
    )
    return float(np.exp(log_c))
