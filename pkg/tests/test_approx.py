import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import null_space

from conftest import random_problem
from oracles import dense_goal_pencil
from goalinf import approx, metrics, model
from goalinf.approx import GoalSpectrum, ParamSpectrum
from goalinf.errors import DegenerateEigenvalue, DimensionMismatch, RankTooLarge
from goalinf.linalg import chol, generalized_eigh
from goalinf.model import GoalProblem
from goalinf.problems import diagonal_problem

seeds = st.integers(0, 2**32 - 1)
I15 = np.arange(1, 16)


def small_random(seed):
    return random_problem(np.random.default_rng(seed), max_n=14, max_d=10, max_p=6)


@pytest.fixture(scope="module")
def diag():
    pb = diagonal_problem(30, 15)
    return pb, approx.goal_spectrum(pb), approx.param_spectrum(pb)


# --- parameter spectrum -----------------------------------------------------------


def test_param_spectrum_zero_forward(rng):
    pb0 = random_problem(rng, n=5, d=3, p=2)
    pb = GoalProblem.create(np.zeros((3, 5)), pb0.O, Gamma_obs=pb0.Gamma_obs, S_pr=pb0.S_pr)
    np.testing.assert_allclose(approx.param_spectrum(pb).deltas_sq, 0.0, atol=1e-14)


def test_param_spectrum_diagonal(diag):
    _, _, sp = diag
    i = np.arange(1, 31)
    expected = np.sort((30 - i) * i)[::-1].astype(float)
    np.testing.assert_allclose(sp.deltas_sq, expected, rtol=1e-12, atol=1e-6)
    assert sp.deltas_sq[0] == pytest.approx(225.0)
    assert np.argmax(np.abs(sp.w[:, 0])) == 14


def test_param_spectrum_k_max_validated(small_problem):
    with pytest.raises(DimensionMismatch):
        approx.param_spectrum(small_problem, k_max=small_problem.n + 1)
    assert len(approx.param_spectrum(small_problem, k_max=2)) == 2


def test_param_opt_cov_rank_zero_and_too_large(small_problem):
    sp = approx.param_spectrum(small_problem)
    np.testing.assert_array_equal(approx.param_opt_cov(sp, small_problem, 0).dense(),
                                  small_problem.Gamma_pr.array)
    with pytest.raises(RankTooLarge):
        approx.param_opt_cov(sp, small_problem, len(sp) + 1)


def test_param_opt_cov_diagonal_rank_one(diag):
    pb, _, sp = diag
    cov = approx.param_opt_cov(sp, pb, 1).dense()
    assert cov[14, 14] == pytest.approx(15 / 226, rel=1e-12)
    others = np.delete(np.diag(cov), 14)
    np.testing.assert_allclose(others, np.delete(np.arange(1.0, 31.0), 14), rtol=1e-12)


def test_param_opt_error_closed_forms():
    sp = ParamSpectrum(np.array([4.0, np.e - 1]), np.eye(2))
    assert approx.param_opt_error(sp, 1) == pytest.approx(np.sqrt(0.5))
    assert approx.param_opt_error(sp, 2) == 0.0


def test_naive_rank_zero_is_qoi_prior(small_problem):
    sp = approx.param_spectrum(small_problem)
    np.testing.assert_allclose(approx.naive_qoi_cov(small_problem, sp, 0),
                               model.qoi_prior_cov(small_problem).array)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_param_spectrum_against_dense_pencil(seed):
    pb = small_random(seed)
    sp = approx.param_spectrum(pb)
    H = model.hessian(pb)
    Pinv = np.linalg.inv(pb.Gamma_pr.array)
    res = H @ sp.w - Pinv @ sp.w * sp.deltas_sq
    assert np.abs(res).max() <= 1e-8 * max(1.0, np.abs(H).max())
    np.testing.assert_allclose(sp.w.T @ Pinv @ sp.w, np.eye(pb.n), atol=1e-8)
    assert np.all(np.diff(sp.deltas_sq) <= 0) and np.all(sp.deltas_sq >= 0)
    Gamma_pos = np.linalg.inv(model.posterior_precision(pb))
    full = approx.param_opt_cov(sp, pb, pb.n).dense()
    np.testing.assert_allclose(full, Gamma_pos, atol=1e-8 * np.abs(Gamma_pos).max())
    np.testing.assert_allclose(approx.naive_qoi_cov(pb, sp, pb.n),
                               model.posterior_qoi_cov(pb).array,
                               atol=1e-8 * np.abs(Gamma_pos).max())


# --- goal spectrum ---------------------------------------------------------------


def test_goal_spectrum_zero_forward(rng):
    pb0 = random_problem(rng, n=5, d=3, p=2)
    pb = GoalProblem.create(np.zeros((3, 5)), pb0.O, Gamma_obs=pb0.Gamma_obs, S_pr=pb0.S_pr)
    assert len(approx.goal_spectrum(pb)) == 0
    np.testing.assert_allclose(approx.optimal_qoi_cov(approx.goal_spectrum(pb), pb, 0).dense(),
                               model.qoi_prior_cov(pb).array)


def test_goal_spectrum_diagonal(diag):
    _, gs, _ = diag
    assert len(gs) == 15
    expected = np.sort((30 - I15) * I15 / (1.0 + (30 - I15) * I15))[::-1]
    np.testing.assert_allclose(gs.lambdas, expected, rtol=1e-12)
    assert gs.lambdas[0] == pytest.approx(225 / 226, rel=1e-14)
    assert gs.lambdas[1] == pytest.approx(224 / 225, rel=1e-14)
    assert np.argmax(np.abs(gs.q[:, 0])) == 14


def test_goal_spectrum_k_max(small_problem):
    with pytest.raises(DimensionMismatch):
        approx.goal_spectrum(small_problem, k_max=small_problem.p + 1)
    assert len(approx.goal_spectrum(small_problem, k_max=1)) == 1


def test_optimal_cov_diagonal_rank_one(diag):
    pb, gs, _ = diag
    cov = approx.optimal_qoi_cov(gs, pb, 1).dense()
    assert cov[14, 14] == pytest.approx(15 / 226, rel=1e-12)
    np.testing.assert_allclose(np.delete(np.diag(cov), 14), np.delete(I15, 14), rtol=1e-12)
    assert np.abs(cov - np.diag(np.diag(cov))).max() < 1e-12
    S = approx.qoi_sqrt(gs, pb, 1)
    SS = S @ S.T
    assert SS[14, 14] == pytest.approx(15 / 226, rel=1e-12)
    assert np.abs(SS - np.diag(np.diag(SS))).max() < 1e-12


def test_mean_map_diagonal_rank_one(diag, rng):
    _, gs, _ = diag
    y = rng.standard_normal(30)
    expected = np.zeros(15)
    expected[14] = 225 / 226 * y[14]
    np.testing.assert_allclose(approx.mean_map(gs, 1).apply(y), expected, atol=1e-12)


def test_rank_zero_objects(small_problem):
    pb = small_problem
    gs = approx.goal_spectrum(pb)
    np.testing.assert_allclose(approx.optimal_qoi_cov(gs, pb, 0).dense(),
                               model.qoi_prior_cov(pb).array)
    np.testing.assert_allclose(approx.goal_param_cov(gs, pb, 0).dense(), pb.Gamma_pr.array)
    np.testing.assert_allclose(approx.qoi_sqrt(gs, pb, 0), pb.O @ pb.S_pr)
    assert np.all(approx.mean_map(gs, 0).dense() == 0)


def test_rank_too_large(small_problem):
    gs = approx.goal_spectrum(small_problem)
    k = len(gs) + 1
    for fn in (lambda: approx.optimal_qoi_cov(gs, small_problem, k),
               lambda: approx.goal_param_cov(gs, small_problem, k),
               lambda: approx.qoi_sqrt(gs, small_problem, k),
               lambda: approx.mean_map(gs, k)):
        with pytest.raises(RankTooLarge):
            fn()


def test_optimal_error_closed_forms():
    gs = GoalSpectrum(np.array([0.9, 1 - 1 / np.e]), *[np.zeros((1, 2))] * 4)
    assert approx.optimal_qoi_error(gs, 1) == pytest.approx(np.sqrt(0.5))
    assert approx.optimal_qoi_error(gs, 2) == 0.0


def test_bayes_risk_closed_forms():
    gs = GoalSpectrum(np.array([0.5]), *[np.zeros((1, 1))] * 4)
    assert approx.predicted_bayes_risk(gs, 0, 0) == pytest.approx(1.0)
    assert approx.predicted_bayes_risk(gs, 1, 7) == 7.0
    assert approx.predicted_mean_error(gs, 0) == pytest.approx(1.0)


def test_degenerate_eigenvalue_rejected():
    lam = np.array([1.0 - 1e-15])
    gs = GoalSpectrum(lam, np.zeros((1, 1)), np.zeros((1, 1)), np.zeros((2, 1)), np.zeros((2, 1)))
    pb = GoalProblem.create(np.ones((1, 2)), [[1.0, 0.0]], Gamma_obs=[[1.0]], Gamma_pr=np.eye(2))
    with pytest.raises(DegenerateEigenvalue):
        approx.qoi_sqrt(gs, pb, 1)
    with pytest.raises(DegenerateEigenvalue):
        approx.optimal_qoi_error(gs, 0)


def test_low_rank_cov_matvec(small_problem, rng):
    gs = approx.goal_spectrum(small_problem)
    cov = approx.optimal_qoi_cov(gs, small_problem, 1)
    x = rng.standard_normal(small_problem.p)
    np.testing.assert_allclose(cov.matvec(x), cov.dense() @ x, rtol=1e-12)
    X = rng.standard_normal((small_problem.p, 3))
    np.testing.assert_allclose(cov.matvec(X), cov.dense() @ X, rtol=1e-12)
    assert cov.rank == 1
    np.testing.assert_array_equal(approx.densify(cov), cov.dense())


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_goal_spectrum_properties(seed):
    pb = small_random(seed)
    gs = approx.goal_spectrum(pb)
    k = len(gs)
    assert k <= min(pb.p, pb.d)
    assert np.all((gs.lambdas > 0) & (gs.lambdas < 1)) and np.all(np.diff(gs.lambdas) <= 0)
    A, B = dense_goal_pencil(pb)
    res = A @ gs.q - B @ gs.q * gs.lambdas
    assert np.abs(res).max() <= 1e-8 * max(1.0, np.abs(A).max(), np.abs(B).max())
    np.testing.assert_allclose(np.einsum("ij,ij->j", gs.q, A @ gs.q), 1.0, rtol=1e-8)
    dense = generalized_eigh(A, B).values[:k]
    np.testing.assert_allclose(gs.lambdas, dense, atol=1e-9)
    Gz = model.qoi_prior_cov(pb)
    np.testing.assert_allclose(gs.q_hat.T @ Gz.solve(gs.q_hat), np.eye(k), atol=1e-8)
    np.testing.assert_allclose(gs.q_tilde.T @ pb.Gamma_pr.solve(gs.q_tilde), np.eye(k), atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_full_rank_recovers_exact_posterior(seed):
    pb = small_random(seed)
    gs = approx.goal_spectrum(pb)
    exact = model.posterior_qoi_cov(pb).array
    got = approx.optimal_qoi_cov(gs, pb, len(gs)).dense()
    assert np.linalg.norm(got - exact) <= 1e-8 * np.linalg.norm(exact)
    M = model.posterior_mean_map(pb)
    Y = np.random.default_rng(seed).standard_normal((20, pb.d))
    np.testing.assert_allclose(approx.mean_map(gs, len(gs)).apply(Y), Y @ M.T,
                               atol=1e-8 * max(1.0, np.abs(Y @ M.T).max()))


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_goal_param_cov_and_square_root(seed):
    pb = small_random(seed)
    gs = approx.goal_spectrum(pb)
    N = null_space(pb.O)
    Pinv = np.linalg.inv(pb.Gamma_pr.array)
    assert np.abs(gs.q_tilde.T @ Pinv @ N).max() <= 1e-8 * max(1.0, np.abs(Pinv).max())
    for r in range(len(gs) + 1):
        target = approx.optimal_qoi_cov(gs, pb, r).dense()
        pushed = pb.O @ approx.goal_param_cov(gs, pb, r).dense() @ pb.O.T
        np.testing.assert_allclose(pushed, target, atol=1e-10 * np.abs(target).max())
        S = approx.qoi_sqrt(gs, pb, r)
        assert np.linalg.norm(S @ S.T - target) < 1e-10 * np.linalg.norm(target)
        chol(target)


@settings(max_examples=30, deadline=None)
@given(seed=seeds)
def test_errors_monotone_and_sandwiched(seed):
    pb = small_random(seed)
    gs = approx.goal_spectrum(pb)
    sp = approx.param_spectrum(pb)
    post_z = model.posterior_qoi_cov(pb)
    post = np.linalg.inv(model.posterior_precision(pb))
    prev_o = prev_p = np.inf
    for r in range(min(pb.p, pb.d) + 1):
        rg = min(r, len(gs))
        e_opt = approx.optimal_qoi_error(gs, rg)
        e_par = approx.param_opt_error(sp, r)
        assert e_opt <= prev_o + 1e-12 and e_par <= prev_p + 1e-12
        prev_o, prev_p = e_opt, e_par
        d_opt = metrics.forstner(post_z, approx.optimal_qoi_cov(gs, pb, rg).dense())
        d_naive = metrics.forstner(post_z, approx.naive_qoi_cov(pb, sp, r))
        d_par = metrics.forstner(post, approx.param_opt_cov(sp, pb, r).dense())
        assert d_opt == pytest.approx(e_opt, abs=1e-8)
        assert d_par == pytest.approx(e_par, abs=1e-8)
        assert d_opt <= d_naive + 1e-10 and d_naive <= d_par + 1e-10
