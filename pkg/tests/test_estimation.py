import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from gofmult.distributions import Gamma, MultivariateNormal, MultivariateT, Normal, Weibull
from gofmult.errors import DegenerateData, NumericalFailure, SingularInformation
from gofmult.estimation import (
    FitConfig,
    cdf_gradient,
    fit_mle,
    information_estimate,
    richardson_gradient,
    score_matrix,
)
from gofmult.mvt_analytic import MvtParams, mvt_logpdf_grad
from gofmult.registry import get_family
from gofmult.rng import stream


def test_richardson_quadratic(rng):
    theta = rng.normal(size=4)
    assert_allclose(richardson_gradient(lambda t: t @ t, theta), 2 * theta, atol=1e-9)


def test_richardson_constant():
    assert_allclose(richardson_gradient(lambda t: 3.0, np.array([1.0, -2.0])), 0.0, atol=1e-12)


def test_richardson_smooth_accuracy():
    theta = np.array([0.7, 1.3])
    g = richardson_gradient(lambda t: math.exp(t[0]) * math.sin(t[1]), theta)
    exact = [math.exp(0.7) * math.sin(1.3), math.exp(0.7) * math.cos(1.3)]
    assert_allclose(g, exact, rtol=1e-7)


def test_richardson_one_sided_at_boundary():
    # the domain is t >= 1, so every central step at t = 1 leaves it
    calls = []

    def f(t):
        calls.append(t[0])
        return math.exp(t[0])

    g = richardson_gradient(f, np.array([1.0]), in_domain=lambda t: t[0] >= 1.0)
    assert min(calls) >= 1.0
    assert_allclose(g, math.e, rtol=1e-7)


def test_richardson_failure():
    with pytest.raises(NumericalFailure):
        richardson_gradient(lambda t: np.nan, np.array([1.0]))


def test_richardson_matches_mvt_score(rng):
    f = MultivariateT(2, 5)
    theta = f.pack(np.array([0.1, 0.2]), np.array([1.2, 0.7]), np.array([[1, 0.3], [0.3, 1.0]]))
    x = f.sample(theta, 20, rng)
    n = score_matrix(f, theta, x)
    a = mvt_logpdf_grad(MvtParams.from_theta(f, theta), x)
    assert np.max(np.abs(n - a) / np.maximum(np.abs(a), 1e-6)) <= 1e-5


def test_normal_mle_closed_form():
    x = Normal().sample([10.0, 1.0], 200, stream(31))
    fit = fit_mle(Normal(), x)
    assert_allclose(fit.theta_n, [x.mean(), x.var()], rtol=1e-12)
    fit = fit_mle(Normal(), x, FitConfig(closed_form=False))
    assert_allclose(fit.theta_n, [x.mean(), x.var()], rtol=1e-6)


def test_mvnorm_mle_is_sample_moments():
    f = MultivariateNormal(3)
    x = f.sample(f.pack(np.zeros(3), np.ones(3), np.eye(3)), 300, stream(32))
    expected = np.concatenate([x.mean(axis=0), x.var(axis=0), np.corrcoef(x, rowvar=False)[[0, 0, 1], [1, 2, 2]]])
    assert_allclose(fit_mle(f, x).theta_n, expected, rtol=1e-12)
    assert_allclose(fit_mle(f, x, FitConfig(closed_form=False)).theta_n, expected, rtol=1e-4, atol=1e-6)


def test_gamma_mle_within_standard_errors():
    truth = np.array([98.671, 9.866])
    x = Gamma().sample(truth, 2000, stream(33))
    fit = fit_mle(Gamma(), x, FitConfig(closed_form=False))
    assert np.all(np.abs(fit.theta_n - truth) <= 3 * fit.std_errors)


def test_profile_mle_agrees_with_simplex():
    for fam, truth in [(Gamma(), [2.0, 0.5]), (Weibull(), [1.5, 2.0])]:
        x = fam.sample(np.array(truth), 500, stream(34))
        a = fit_mle(fam, x)
        b = fit_mle(fam, x, FitConfig(closed_form=False))
        assert abs(a.loglik - b.loglik) <= 1e-7
        assert_allclose(a.theta_n, b.theta_n, rtol=1e-5)


@pytest.mark.parametrize("ident,dim,theta", [
    ("logis", 1, [1.0, 0.5]),
    ("t5", 1, [0.0, 2.0]),
    ("weibull", 1, [1.5, 2.0]),
    ("mvt5", 2, [0.0, 1.0, 1.0, 2.0, 0.3]),
    ("nc", 2, [0.0, 1.0, 1.0, 2.0, 1.5]),
    ("t5n", 2, [0.0, 1.0, 1.0, 2.0, 0.3]),
])
def test_first_order_condition_and_influence(ident, dim, theta):
    f = get_family(ident, dim)
    x = f.sample(np.array(theta), 400, stream(35, dim))
    fit = fit_mle(f, x, FitConfig(closed_form=False))
    assert fit.converged
    # score rows are O(1) per observation, so a 1e-8 relative optimum keeps the mean score tiny
    scale = np.abs(fit.scores).mean(axis=0)
    assert np.all(np.abs(fit.scores.mean(axis=0)) <= 1e-4 * scale)
    assert_allclose(fit.influence, fit.scores @ fit.info_inv, rtol=0, atol=0)
    assert np.all(np.abs(fit.influence.mean(axis=0)) <= 1e-4 * np.abs(fit.influence).mean(axis=0))


def test_refit_recovers_estimate():
    f = MultivariateT(2, 5)
    x = f.sample(f.pack(np.zeros(2), np.ones(2), np.array([[1, 0.5], [0.5, 1.0]])), 500, stream(36))
    fit = fit_mle(f, x)
    y = f.sample(fit.theta_n, 500, stream(37))
    refit = fit_mle(f, y)
    assert np.all(np.abs(refit.theta_n - fit.theta_n) <= 3 * fit.std_errors)


def test_information_normal():
    x = Normal().sample([0.0, 4.0], 20000, stream(38))
    fit = fit_mle(Normal(), x)
    v = fit.theta_n[1]
    assert_allclose(fit.info, np.diag([1 / v, 1 / (2 * v * v)]), rtol=0.05, atol=0.01 / v)


def test_information_singular():
    with pytest.raises(SingularInformation):
        information_estimate(np.tile([1.0, 2.0], (50, 1)))
    with pytest.raises(SingularInformation):
        information_estimate(np.ones((2, 3)))


def test_information_split_sample_stability():
    f = MultivariateT(2, 5)
    theta = f.pack(np.zeros(2), np.ones(2), np.array([[1, 0.3], [0.3, 1.0]]))
    x = f.sample(theta, 5000, stream(39))
    s = f.score(theta, x)
    a, _ = information_estimate(s[:2500])
    b, _ = information_estimate(s[2500:])
    assert np.max(np.abs(a - b) / np.abs(np.diag(a + b) / 2).max()) <= 0.1


def test_cdf_gradient_normal_closed_form():
    x = np.linspace(7, 13, 11)
    g = cdf_gradient(Normal(), np.array([10.0, 2.0]), x)
    z = (x - 10) / math.sqrt(2)
    phi = np.exp(-z * z / 2) / math.sqrt(2 * math.pi)
    assert_allclose(g[:, 0], -phi / math.sqrt(2), atol=1e-6)


def test_cdf_gradient_analytic_vs_numeric():
    f = MultivariateT(2, 5)
    theta = f.pack(np.array([0.1, -0.2]), np.array([1.1, 0.8]), np.array([[1, 0.4], [0.4, 1.0]]))
    x = f.sample(theta, 30, stream(40))
    a = cdf_gradient(f, theta, x, analytic=True)
    n = cdf_gradient(f, theta, x)
    assert np.max(np.abs(a - n) / np.maximum(np.abs(n), 1e-6)) <= 1e-4


def test_cdf_gradient_vanishes_far_left():
    f = MultivariateNormal(2)
    g = cdf_gradient(f, np.array([0, 0, 1, 1, 0.3]), np.array([[-40.0, -40.0]]))
    assert np.max(np.abs(g)) <= 1e-12


def test_fit_errors():
    with pytest.raises(DegenerateData):
        fit_mle(Weibull(), np.full(20, 3.0))
    with pytest.raises(SingularInformation):
        fit_mle(Normal(), np.array([1.0, 2.0]))


def test_config_validation():
    with pytest.raises(ValueError):
        FitConfig(rel_tol=0)
    with pytest.raises(ValueError):
        FitConfig(scale_guard=-1)
