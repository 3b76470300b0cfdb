"""Shared generators for random goal-oriented problems."""

import numpy as np
import pytest

from goalinf.model import GoalProblem


def random_spd(rng, m, shift=1.0, scale=1.0):
    R = rng.standard_normal((m, m)) * scale / np.sqrt(m)
    return R @ R.T + shift * np.eye(m)


def random_problem(rng, n=None, d=None, p=None, max_n=40, max_d=30, max_p=12):
    """Random well-conditioned problem with ``n <= max_n``, ``d <= max_d``, ``p <= max_p``."""
    n = n or int(rng.integers(3, max_n + 1))
    d = d or int(rng.integers(1, max_d + 1))
    p = p or int(rng.integers(1, min(max_p, n - 1) + 1))
    G = rng.standard_normal((d, n))
    O = rng.standard_normal((p, n))
    Gamma_obs = random_spd(rng, d, shift=0.5)
    Gamma_pr = random_spd(rng, n, shift=0.5)
    return GoalProblem.create(G, O, Gamma_obs=Gamma_obs, Gamma_pr=Gamma_pr)


def random_suite(count=50, seed=2024):
    rng = np.random.default_rng(seed)
    return [random_problem(rng) for _ in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def suite():
    return random_suite()


@pytest.fixture
def small_problem(rng):
    return random_problem(rng, n=8, d=5, p=3)
