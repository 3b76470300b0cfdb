"""Sampling through square-root factors, the max pushforward and a Gaussian KDE.

Random streams use the counter-based Philox generator. Large draws are split
into fixed-size shards, each with its own child stream spawned from the parent
generator, so the result depends only on (seed, shard size) and never on how
many threads evaluate the shards.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import stats

from .errors import DegenerateSample

RNG_ALGORITHM = "philox"
SHARD_SIZE = 8192
SILVERMAN = 1.06


def make_rng(seed):
    """Seeded Philox generator; the package-wide reproducibility contract."""
    return np.random.Generator(np.random.Philox(seed))


def _shard_sizes(N, shard_size):
    full, rest = divmod(N, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def sample_factor_gaussian(mean, S, N, rng, threads=1, shard_size=SHARD_SIZE):
    """Draw ``N`` rows ``mean + S @ eps`` with ``eps`` standard normal of length
    ``S.shape[1]`` (which may exceed ``len(mean)``).

    Returns an array of shape ``(N, p)``.
    """
    mean = np.asarray(mean, dtype=float)
    S = np.atleast_2d(np.asarray(S, dtype=float))
    m = S.shape[1]
    sizes = _shard_sizes(N, shard_size)
    streams = rng.spawn(len(sizes))
    out = np.empty((N, len(mean)))
    starts = np.concatenate([[0], np.cumsum(sizes)])

    def fill(j):
        eps = streams[j].standard_normal((sizes[j], m))
        out[starts[j] : starts[j + 1]] = mean + eps @ S.T

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(len(sizes))))
    else:
        for j in range(len(sizes)):
            fill(j)
    return out


def pushforward_max(samples):
    """Per-row maximum, ``g(z) = max_i z_i``."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    return samples.max(axis=1)


def silverman_bandwidth(samples):
    samples = np.asarray(samples, dtype=float)
    sd = samples.std(ddof=1)
    if not sd > 0:
        raise DegenerateSample("sample standard deviation is zero")
    return SILVERMAN * sd * len(samples) ** (-0.2)


def gaussian_kde(samples, eval_points, chunk=256):
    """Gaussian kernel density estimate with Silverman's bandwidth
    ``1.06 * sd * N^(-1/5)``."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 2:
        raise DegenerateSample("need at least two samples")
    h = silverman_bandwidth(samples)
    x = np.asarray(eval_points, dtype=float).ravel()
    dens = np.empty_like(x)
    norm = 1.0 / (len(samples) * h * np.sqrt(2.0 * np.pi))
    for start in range(0, len(x), chunk):
        u = (x[start : start + chunk, None] - samples[None, :]) / h
        dens[start : start + chunk] = norm * np.exp(-0.5 * u * u).sum(axis=1)
    return dens


def kde_grid(samples, num=512, pad=4.0):
    """Evaluation grid covering the sample range plus ``pad`` bandwidths."""
    samples = np.asarray(samples, dtype=float)
    h = silverman_bandwidth(samples)
    return np.linspace(samples.min() - pad * h, samples.max() + pad * h, num)


def ks_statistic(a, b):
    """Two-sample Kolmogorov-Smirnov statistic."""
    return float(stats.ks_2samp(a, b).statistic)
