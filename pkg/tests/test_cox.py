import math

import numpy as np
import pytest

from oracles import central_gradient, central_jacobian, rel_err
from plsa import cox
from plsa.cox import (CoxModel, CoxQuasiLikelihood, CoxSample, gamma_analytic, g_hat_hessian,
                      g_hat_moment, preset_cox_model, qmle, simulate, simulate_covariates,
                      simulate_events, y_diagnostic)
from plsa.errors import InvalidInputError, NumericalError

# exp(1/2 sum theta_j^2 v_j) for the 20-covariate model with v_j = 0.16 / (2 a_j);
# the exponent is 86/35 in exact rational arithmetic
PRESET_MEAN_RATE = 11.671416950568904
# E[X^2 exp(X)] for X ~ N(0, 1), by adaptive quadrature
SCALAR_GAMMA = 3.297442541400256


def small_model(theta=(0.5, -0.3, 0.0), horizon=50.0, **kw):
    theta = np.atleast_2d(theta)
    speeds = np.linspace(0.5, 1.0, theta.shape[1])
    return CoxModel(speeds, theta, horizon, **kw)


# ------------------------------------------------------------ model

def test_model_validation():
    with pytest.raises(InvalidInputError):
        CoxModel([0.1, -0.2], [[1.0, 1.0]], 10.0)
    with pytest.raises(InvalidInputError):
        CoxModel([0.1], [[1.0, 1.0]], 10.0)
    with pytest.raises(InvalidInputError):
        CoxModel([0.1], [[1.0]], 10.0, grid_step=0.3)


def test_preset_model_shape():
    m = preset_cox_model(200.0)
    assert (m.n_marks, m.n_covariates, m.p, m.n_cells) == (1, 20, 20, 20000)
    assert m.rate() == pytest.approx(200 ** -0.5)
    np.testing.assert_allclose(m.stationary_vars()[:5], 0.16 / (2 * np.array(cox.PRESET_SPEEDS[:5])))


# ------------------------------------------------------------ covariates

def test_ou_stationary_variance():
    m = CoxModel([0.2], [[0.0]], 50.0, ou_vol=0.4)
    rng = np.random.default_rng(0)
    finals = np.array([simulate_covariates(m, rng)[-1, 0] for _ in range(10000)])
    target = 0.4 ** 2 / (2 * 0.2) * (1 - math.exp(-2 * 0.2 * 50))
    se = target * math.sqrt(2 / (finals.size - 1))
    assert abs(finals.var(ddof=1) - target) < 3 * se
    assert abs(finals.mean()) < 3 * math.sqrt(target / finals.size)


@pytest.mark.parametrize("step", [0.01, 0.005, 0.0025])
def test_ou_transition_is_exact_under_grid_halving(step):
    m = CoxModel([0.7], [[0.0]], 2.0, ou_vol=0.4, grid_step=step)
    rng = np.random.default_rng(int(step * 1e4))
    finals = np.array([simulate_covariates(m, rng)[-1, 0] for _ in range(6000)])
    target = 0.16 / 1.4 * (1 - math.exp(-2 * 0.7 * 2.0))
    assert abs(finals.var(ddof=1) - target) < 3 * target * math.sqrt(2 / 5999)
    assert abs(finals.mean()) < 3 * math.sqrt(target / 6000)


def test_covariates_deterministic():
    m = small_model()
    np.testing.assert_array_equal(simulate_covariates(m, 42), simulate_covariates(m, 42))
    assert not np.array_equal(simulate_covariates(m, 42), simulate_covariates(m, 43))


def test_covariates_start_at_zero():
    path = simulate_covariates(small_model(), 1)
    np.testing.assert_array_equal(path[0], 0.0)


# ------------------------------------------------------------ events

def test_unit_rate_counts():
    m = CoxModel([1.0], [[0.0]], 100.0, grid_step=0.1)
    path = np.zeros((m.n_cells + 1, 1))
    rng = np.random.default_rng(7)
    counts = np.array([len(simulate_events(m, path, rng)[0]) for _ in range(10000)])
    se_mean = math.sqrt(100 / 10000)
    assert abs(counts.mean() - 100) < 3 * se_mean
    # variance of the sample variance of a Poisson(100) is about 2 * 100^2 / n
    assert abs(counts.var(ddof=1) - 100) < 3 * math.sqrt(2 * 100 ** 2 / 9999 + 100 / 10000)


def test_constant_path_count_is_poisson():
    m = CoxModel([1.0, 1.0], [[0.7, -0.4]], 20.0, grid_step=0.05)
    x = np.array([0.5, 1.0])
    path = np.tile(x, (m.n_cells + 1, 1))
    lam = 20.0 * math.exp(0.7 * 0.5 - 0.4)
    rng = np.random.default_rng(8)
    counts = np.array([len(simulate_events(m, path, rng)[0]) for _ in range(5000)])
    assert abs(counts.mean() - lam) < 3 * math.sqrt(lam / 5000)
    assert abs(counts.var(ddof=1) - lam) < 3 * math.sqrt(2 * lam ** 2 / 4999 + lam / 5000)


def test_preset_model_mean_count():
    # stationary start so that E[count] = T * E[exp(theta' X_0)] exactly
    base = preset_cox_model(100.0)
    m = CoxModel(base.ou_speeds, base.theta_true, 100.0, x0="stationary")
    counts = np.array([simulate(m, seed=11, index=i).n_events() for i in range(300)],
                      dtype=float)
    se = counts.std(ddof=1) / math.sqrt(counts.size)
    assert abs(counts.mean() - 100.0 * PRESET_MEAN_RATE) < 3 * se


def test_events_are_simple_and_in_range():
    m = small_model(theta=(1.5, -1.0, 0.5), horizon=30.0)
    s = simulate(m, seed=3)
    t = s.event_times[0]
    assert t.size > 0
    assert np.all(np.diff(t) > 0)
    assert t[0] > 0 and t[-1] <= 30.0
    assert s.cell_counts().sum() == t.size


def test_cell_assignment_convention():
    s = CoxSample(np.zeros((4, 1)), [np.array([0.5, 1.0, 1.0000001, 3.0])], 1.0)
    np.testing.assert_array_equal(s.cell_counts(), [[2, 1, 1]])


def test_intensity_overflow_raises():
    m = CoxModel([1.0], [[40.0]], 1.0)
    path = np.ones((m.n_cells + 1, 1))
    with pytest.raises(NumericalError):
        simulate_events(m, path, 0)


def test_simulate_deterministic_and_stream_separated():
    m = small_model()
    a, b = simulate(m, seed=5, index=2), simulate(m, seed=5, index=2)
    np.testing.assert_array_equal(a.covariate_path, b.covariate_path)
    np.testing.assert_array_equal(a.event_times[0], b.event_times[0])
    c = simulate(m, seed=5, index=3)
    assert not np.array_equal(a.covariate_path, c.covariate_path)


# ------------------------------------------------------------ quasi-likelihood

def test_no_events_zero_theta():
    s = CoxSample(np.zeros((1001, 2)), [np.array([])], 0.01)
    assert cox.quasi_loglik(s, np.zeros(2)) == pytest.approx(-10.0, rel=1e-12)


def test_loglik_explicit_formula():
    path = np.array([[0.0], [1.0], [2.0]])
    s = CoxSample(path, [np.array([1.5])], 1.0)
    th = np.array([0.3])
    expected = 0.3 * 1.0 - (math.exp(0.0) + math.exp(0.3))
    assert cox.quasi_loglik(s, th) == pytest.approx(expected, rel=1e-14)


@pytest.fixture(scope="module")
def cox_sample():
    return simulate(preset_cox_model(20.0), seed=1)


def test_gradient_hessian_finite_differences(cox_sample):
    lik = CoxQuasiLikelihood(cox_sample)
    rng = np.random.default_rng(0)
    for _ in range(20):
        th = rng.uniform(-0.5, 0.5, size=20) + np.array(cox.PRESET_THETA) * 0.5
        g = lik.gradient_loglik(th)
        assert rel_err(g, central_gradient(lik.loglik, th, h=1e-5)) < 1e-6
        h = lik.hessian_loglik(th)
        assert rel_err(h, central_jacobian(lik.gradient_loglik, th, h=1e-5)) < 1e-6


def test_hessian_is_negative_semidefinite(cox_sample):
    lik = CoxQuasiLikelihood(cox_sample)
    rng = np.random.default_rng(1)
    for _ in range(10):
        ev = np.linalg.eigvalsh(lik.hessian_loglik(rng.normal(size=20)))
        assert ev.max() <= 1e-10 * max(1.0, abs(ev).max())


def test_loss_interface_negates_and_guards(cox_sample):
    lik = CoxQuasiLikelihood(cox_sample)
    th = np.full(20, 0.1)
    assert lik.value(th) == -lik.loglik(th)
    assert lik.value(np.full(20, 100.0)) == math.inf
    with pytest.raises(InvalidInputError):
        lik.loglik(np.zeros(3))


# ------------------------------------------------------------ QMLE

def test_qmle_stationary_and_restart_invariant():
    m = small_model(horizon=200.0)
    s = simulate(m, seed=2)
    lik = CoxQuasiLikelihood(s)
    th = qmle(s)
    assert np.linalg.norm(lik.gradient_loglik(th)) < 1e-6
    rng = np.random.default_rng(3)
    for _ in range(3):
        other = qmle(s, start=rng.uniform(-1, 1, size=3))
        np.testing.assert_allclose(other, th, atol=1e-6)


def test_qmle_zero_events_raises():
    s = CoxSample(np.zeros((11, 1)), [np.array([])], 0.1)
    with pytest.raises(NumericalError):
        qmle(s)


def test_qmle_self_consistency_under_null():
    m = CoxModel([0.5, 1.0], [[0.0, 0.0]], 400.0, grid_step=0.05)
    inside = 0
    reps = 60
    for i in range(reps):
        s = simulate(m, seed=9, index=i)
        th = qmle(s)
        cov = np.linalg.inv(g_hat_hessian(s, th)) / 400.0
        inside += np.all(np.abs(th) < 5 * np.sqrt(np.diag(cov)))
    assert inside / reps >= 0.99


# ------------------------------------------------------------ G-hat and Gamma

def test_g_hat_zero_events_structure():
    rng = np.random.default_rng(4)
    path = rng.normal(size=(501, 3))
    s = CoxSample(path, [np.array([])], 0.02)
    th = np.array([0.2, -0.1, 0.3])
    x = path[:-1]
    w = np.exp(x @ th) * 0.02
    expected = (x * w[:, None]).T @ x / 10.0 + np.eye(3) / 10.0
    np.testing.assert_allclose(g_hat_hessian(s, th), expected, rtol=1e-12)
    np.testing.assert_allclose(g_hat_moment(s, th), expected, rtol=1e-12)


def test_g_hat_matches_finite_difference_hessian(cox_sample):
    lik = CoxQuasiLikelihood(cox_sample)
    th = np.array(cox.PRESET_THETA) * 0.9
    fd = -central_jacobian(lik.gradient_loglik, th) / cox_sample.horizon
    ridge = np.eye(20) / cox_sample.horizon
    assert rel_err(g_hat_hessian(cox_sample, th) - ridge, fd) < 1e-6


def test_g_hat_constructions_coincide(cox_sample):
    th = np.array(cox.PRESET_THETA)
    np.testing.assert_allclose(g_hat_hessian(cox_sample, th), g_hat_moment(cox_sample, th),
                               rtol=1e-12, atol=1e-14)


def test_g_hat_drops_non_pd_curvature():
    s = CoxSample(np.zeros((11, 2)), [np.array([])], 0.1)  # X == 0: curvature is singular
    np.testing.assert_allclose(g_hat_hessian(s, np.zeros(2)), np.eye(2) / 1.0)


def test_gamma_analytic_examples():
    np.testing.assert_array_equal(gamma_analytic([0.0, 0.0], [0.3, 0.5]), np.diag([0.3, 0.5]))
    assert gamma_analytic([1.0], [1.0])[0, 0] == pytest.approx(SCALAR_GAMMA, rel=1e-14)


def test_gamma_analytic_monte_carlo():
    rng = np.random.default_rng(12)
    v = np.array([0.4, 0.2, 0.3])
    th = np.array([0.8, -0.5, 0.3])
    x = rng.normal(size=(1_000_000, 3)) * np.sqrt(v)
    w = np.exp(x @ th)
    terms = x[:, :, None] * x[:, None, :] * w[:, None, None]
    mc = terms.mean(axis=0)
    se = terms.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
    assert np.all(np.abs(mc - gamma_analytic(th, v)) < 3.5 * se)


def test_g_hat_converges_to_gamma_light_tailed():
    # two covariates with small stationary variance: exp(theta'X) has mild
    # tails, so path averages settle quickly
    theta = np.array([0.5, -0.5])
    m = CoxModel([1.0, 1.5], [theta], 500.0, x0="stationary", grid_step=0.02)
    gamma = gamma_analytic(theta, m.stationary_vars())
    errs = {}
    for horizon in (100.0, 2000.0):
        mm = m.with_horizon(horizon)
        acc = np.zeros((2, 2))
        for i in range(10):
            s = simulate(mm, seed=13, index=i)
            acc += g_hat_moment(s, qmle(s)) - np.eye(2) / horizon
        errs[horizon] = rel_err(acc / 10, gamma)
    assert errs[2000.0] < 0.05
    assert errs[2000.0] < errs[100.0]


# ------------------------------------------------------------ Y diagnostic

def test_y_diagnostic_zero_at_truth(cox_sample):
    th = np.array(cox.PRESET_THETA)
    assert y_diagnostic(cox_sample, th, th) == 0.0


def test_y_diagnostic_negative_away_from_truth():
    m = small_model(horizon=400.0, grid_step=0.05)
    star = m.theta_true.ravel()
    e1 = np.eye(3)[0]
    neg = sum(y_diagnostic(simulate(m, seed=14, index=i), star + e1, star) < 0
              for i in range(40))
    assert neg == 40


def test_y_diagnostic_locally_quadratic():
    # Y(theta* + eps d) averaged over paths is about -eps^2 d'Gamma d / 2 up
    # to a cubic remainder, so doubling eps roughly quadruples it
    m = small_model(horizon=400.0, grid_step=0.05, x0="stationary")
    star = m.theta_true.ravel()
    d = np.array([1.0, 1.0, -1.0]) / math.sqrt(3)
    samples = [simulate(m, seed=15, index=i) for i in range(40)]
    y1 = np.mean([y_diagnostic(s, star + 0.2 * d, star) for s in samples])
    y2 = np.mean([y_diagnostic(s, star + 0.4 * d, star) for s in samples])
    assert y1 < 0 and y2 < 0
    assert 3.0 < y2 / y1 < 5.0
