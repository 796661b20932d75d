"""Analytic-vs-numeric gradient cross-checks and MP/PB timing comparisons."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..distributions import MultivariateT
from ..estimation import FitConfig, fit_mle, richardson_gradient
from ..gof import bootstrap_statistic, multiplier_test, parametric_bootstrap_test
from ..mvt_analytic import MvtParams, mvt_cdf_grad, mvt_logpdf_grad
from ..rng import stream

GRADIENT_TOL = 1e-4
# floor for the denominator of the relative error: gradient entries below it
# are compared on the absolute scale
RELATIVE_FLOOR = 1e-6


def random_corr(rng, d):
    """Random correlation matrix with moderate off-diagonal entries."""
    while True:
        A = rng.standard_normal((d, d + 2))
        S = A @ A.T
        s = np.sqrt(np.diag(S))
        R = S / np.outer(s, s)
        if np.min(np.linalg.eigvalsh(R)) > 0.05:
            return R


def random_config(rng, family):
    d = family.dim
    mu = rng.normal(0.0, 1.0, d)
    l2 = rng.uniform(0.5, 2.0, d)
    R = random_corr(rng, d)
    theta = family.pack(mu, l2, R)
    # a point drawn from the law itself keeps the check in the bulk
    x = family.sample(theta, 1, rng)
    return theta, x


def relative_error(analytic, numeric, floor=RELATIVE_FLOOR):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    return np.abs(analytic - numeric) / np.maximum(np.abs(numeric), floor)


@dataclass
class GradientCheckReport:
    family: str
    trials: int
    max_rel_error_cdf: float
    max_rel_error_logpdf: float
    tolerance: float = GRADIENT_TOL
    worst: dict = field(default_factory=dict)

    @property
    def max_rel_error(self):
        return max(self.max_rel_error_cdf, self.max_rel_error_logpdf)

    @property
    def passed(self):
        return self.max_rel_error <= self.tolerance

    def as_dict(self):
        return {
            "family": self.family,
            "trials": self.trials,
            "max_rel_error_cdf": self.max_rel_error_cdf,
            "max_rel_error_logpdf": self.max_rel_error_logpdf,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def run_gradient_check(family, trials=100, seed=0, corrupt=None):
    """Compare analytic multivariate-t gradients with Richardson differences.

    ``corrupt`` is a hook for mutation tests: a function applied to each
    analytic CDF gradient row before comparison.
    """
    if not isinstance(family, MultivariateT):
        raise ValueError("the gradient check applies to multivariate t families")
    rng = stream(seed, 0xC4EC)
    worst_cdf = worst_log = 0.0
    worst = {}
    for k in range(int(trials)):
        theta, x = random_config(rng, family)
        params = MvtParams.from_theta(family, theta)
        a_cdf = mvt_cdf_grad(params, x)
        if corrupt is not None:
            a_cdf = corrupt(a_cdf)
        n_cdf = richardson_gradient(lambda t: family.cdf(t, x), theta, in_domain=family.in_domain).reshape(a_cdf.shape)
        a_log = mvt_logpdf_grad(params, x)
        n_log = richardson_gradient(lambda t: family.logpdf(t, x), theta, in_domain=family.in_domain).reshape(a_log.shape)
        e_cdf = float(np.max(relative_error(a_cdf, n_cdf)))
        e_log = float(np.max(relative_error(a_log, n_log)))
        if e_cdf > worst_cdf:
            worst_cdf = e_cdf
            worst["cdf"] = {"trial": k, "theta": theta.tolist(), "x": x.ravel().tolist()}
        if e_log > worst_log:
            worst_log = e_log
            worst["logpdf"] = {"trial": k, "theta": theta.tolist(), "x": x.ravel().tolist()}
    return GradientCheckReport(family.name, int(trials), worst_cdf, worst_log, worst=worst)


@dataclass
class TimingReport:
    family: str
    n: int
    N: int
    mp_numeric: float
    mp_analytic: float | None
    pb: float
    pb_replicates_run: int

    @property
    def speedup_pb(self):
        best = self.mp_analytic if self.mp_analytic is not None else self.mp_numeric
        return self.pb / best

    @property
    def speedup_analytic(self):
        return None if self.mp_analytic is None else self.mp_numeric / self.mp_analytic

    def as_dict(self):
        return {
            "family": self.family,
            "n": self.n,
            "N": self.N,
            "mp_numeric_seconds": self.mp_numeric,
            "mp_analytic_seconds": self.mp_analytic,
            "pb_seconds": self.pb,
            "pb_replicates_run": self.pb_replicates_run,
            "pb_over_mp": self.speedup_pb,
            "numeric_over_analytic": self.speedup_analytic,
        }


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def run_timing(family, data, N=1000, statistic="Sn*", seed=0, pb_replicates=None, mp_numeric=True):
    """End-to-end wall times of MP (numeric and, for t families, analytic) and PB.

    PB cost is linear in the number of replicates, so with ``pb_replicates``
    set only that many bootstrap replicates are run (one shared fit of the
    data, as in a full run) and the per-replicate cost is scaled to ``N``.
    """
    data = np.asarray(data, dtype=float)
    numeric_cfg = FitConfig(use_analytic_grads=False)
    t_num = _timed(lambda: multiplier_test(family, data, statistic, N, config=numeric_cfg, seed=seed)) if mp_numeric else math.nan
    t_ana = None
    if isinstance(family, MultivariateT):
        cfg = FitConfig(use_analytic_grads=True)
        t_ana = _timed(lambda: multiplier_test(family, data, statistic, N, config=cfg, seed=seed))
    run = N if pb_replicates is None else min(int(pb_replicates), N)
    if run >= N:
        t_pb = _timed(lambda: parametric_bootstrap_test(family, data, statistic, N, seed=seed))
    else:
        t0 = time.perf_counter()
        fit = fit_mle(family, data, numeric_cfg, with_influence=False)
        t_fit = time.perf_counter() - t0
        t_obs = _timed(lambda: bootstrap_statistic(family, data, fit.theta_n, statistic))
        t0 = time.perf_counter()
        for k in range(run):
            sample = family.sample(fit.theta_n, data.shape[0], stream(seed, k))
            refit = fit_mle(family, sample, numeric_cfg, with_influence=False)
            bootstrap_statistic(family, sample, refit.theta_n, statistic)
        per = (time.perf_counter() - t0) / run
        t_pb = t_fit + t_obs + per * N
    return TimingReport(family.name, data.shape[0], int(N), t_num, t_ana, t_pb, run)

