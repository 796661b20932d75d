"""Goodness-of-fit tests based on the empirical process with estimated parameters.

Four statistics are available:

``Sn``
    Cramer-von Mises on a fitted-quantile grid, n * mean_j (F_n(y_j) - F(y_j))^2
    with y_j = F^{-1}(j / (m + 1)); d = 1 only.
``Tn``
    Kolmogorov-Smirnov on the same grid, sqrt(n) * max_j |F_n(y_j) - F(y_j)|.
``Sn*``
    sum_i (F_n(X_i) - F(X_i))^2 over the sample.
``Tn*``
    sqrt(n) * max_i |F_n(X_i) - F(X_i)|.

Null distributions are approximated either by multipliers (MP), which perturb
the fitted process with centered i.i.d. weights, or by the parametric
bootstrap (PB), which re-simulates and refits.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .distributions import as_points
from .errors import FIT_ERRORS, ReplicateFailure
from .estimation import FitConfig, cdf_gradient, fit_mle
from .rng import stream

STATISTICS = ("Sn", "Tn", "Sn*", "Tn*")
GRID_STATISTICS = ("Sn", "Tn")
DEFAULT_GRID = 1000
MIN_REPLICATES = 100
MAX_FAILURE_FRACTION = 0.02
BATCH = 128

_ALIASES = {
    "sn": "Sn", "tn": "Tn", "sn*": "Sn*", "tn*": "Tn*",
    "snstar": "Sn*", "tnstar": "Tn*", "sn_star": "Sn*", "tn_star": "Tn*",
}


def normalize_statistic(name):
    key = str(name).strip().lower()
    if key not in _ALIASES:
        raise ValueError(f"unknown statistic {name!r}; choose from {', '.join(STATISTICS)}")
    return _ALIASES[key]


def uniform_grid(m=DEFAULT_GRID):
    return np.arange(1, m + 1) / (m + 1.0)


def indicator_matrix(data, points):
    """Boolean (n, m) matrix with entry (i, j) = 1(X_i <= x_j) componentwise."""
    data = np.asarray(data, dtype=float)
    points = np.asarray(points, dtype=float)
    out = np.ones((data.shape[0], points.shape[0]), dtype=bool)
    for k in range(data.shape[1]):
        out &= data[:, k][:, None] <= points[:, k][None, :]
    return out


def empirical_cdf(data, points):
    """F_n at each evaluation point."""
    data = np.asarray(data, dtype=float)
    points = np.asarray(points, dtype=float)
    if data.shape[1] == 1:
        return np.searchsorted(np.sort(data[:, 0]), points[:, 0], side="right") / data.shape[0]
    return indicator_matrix(data, points).mean(axis=0)


def _grid_points(family, theta, m):
    u = uniform_grid(m)
    return family.ppf(theta, u).reshape(-1, 1), u


@dataclass(frozen=True)
class GofContext:
    """Objects shared by the observed statistic and all multiplier replicates.

    ``indicator`` and ``influence``/``Fdot`` are only needed by the multiplier
    procedure and may be None for bootstrap replicates.
    """

    statistic: str
    data: np.ndarray
    theta: np.ndarray
    eval_points: np.ndarray
    Fn: np.ndarray
    Fhat: np.ndarray
    indicator: np.ndarray | None = None
    influence: np.ndarray | None = None
    Fdot: np.ndarray | None = None

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def m(self):
        return self.eval_points.shape[0]


def build_context(family, data, fit, statistic="Sn*", m=DEFAULT_GRID, analytic=False, multiplier=True):
    """Precompute indicators, F_n, F_theta and its gradient at the evaluation points.

    Grid statistics use y_j = F^{-1}(j / (m + 1)) for the fitted law (d = 1
    only); the starred statistics evaluate at the sample itself.
    """
    statistic = normalize_statistic(statistic)
    data = as_points(data, family.dim)
    theta = np.asarray(fit.theta_n if hasattr(fit, "theta_n") else fit, dtype=float)
    if statistic in GRID_STATISTICS:
        if family.dim != 1:
            raise ValueError(f"{statistic} is only defined for univariate data; use Sn* or Tn*")
        points, Fhat = _grid_points(family, theta, m)
    else:
        points = data
        Fhat = family.cdf(theta, points)
    Fn = empirical_cdf(data, points)
    indicator = influence = Fdot = None
    if multiplier:
        if getattr(fit, "influence", None) is None:
            raise ValueError("the multiplier procedure needs a fit with influence rows")
        indicator = indicator_matrix(data, points).astype(float)
        influence = fit.influence
        Fdot = cdf_gradient(family, theta, points, analytic=analytic)
    return GofContext(statistic, data, theta, points, Fn, np.asarray(Fhat, dtype=float), indicator, influence, Fdot)


def _functional(statistic, values, n):
    """Statistic of a process given as values of sqrt(n)(F_n - F) at the points.

    ``values`` may be a batch with shape (B, m).
    """
    if statistic == "Sn":
        return np.mean(values * values, axis=-1)
    if statistic == "Sn*":
        return np.sum(values * values, axis=-1) / n
    return np.max(np.abs(values), axis=-1)


def statistic_observed(ctx: GofContext):
    return float(_functional(ctx.statistic, math.sqrt(ctx.n) * (ctx.Fn - ctx.Fhat), ctx.n))


def multiplier_process(ctx: GofContext, z):
    """Multiplier process at the evaluation points for weights ``z``.

    ``z`` has shape (n,) or (B, n); the result has shape (m,) or (B, m).
    Uses (1/sqrt n)[sum_i w_i 1(X_i <= x_j) - a^T Fdot(x_j)] with w = z - mean(z)
    and a = sum_i w_i psi_i.
    """
    z = np.asarray(z, dtype=float)
    w = z - z.mean(axis=-1, keepdims=True)
    a = w @ ctx.influence
    return (w @ ctx.indicator - a @ ctx.Fdot.T) / math.sqrt(ctx.n)


def multiplier_replicate(ctx: GofContext, z):
    """Replicate statistic(s) for multiplier weights ``z`` of shape (n,) or (B, n)."""
    out = _functional(ctx.statistic, multiplier_process(ctx, z), ctx.n)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MultiplierWeights:
    """Generator of i.i.d. mean-0, variance-1 multipliers."""

    kind: str = "normal"

    def __post_init__(self):
        if self.kind not in ("normal", "rademacher"):
            raise ValueError("multiplier kind must be 'normal' or 'rademacher'")

    def draw(self, rng, size):
        if self.kind == "normal":
            return rng.standard_normal(size)
        return rng.choice(np.array([-1.0, 1.0]), size=size)


def pvalue(observed, replicates, corrected=False):
    """(1/N) #{replicates >= observed}, or (k + 1)/(N + 1) when ``corrected``."""
    replicates = np.asarray(replicates, dtype=float)
    k = int(np.sum(replicates >= observed))
    if corrected:
        return (k + 1.0) / (replicates.size + 1.0)
    return k / replicates.size


@dataclass
class GofResult:
    statistic: str
    observed: float
    replicates: np.ndarray = field(repr=False)
    pvalue: float
    method: str
    seed: int | None = None
    wall_time: float = 0.0
    family: str = ""
    theta_n: np.ndarray | None = None
    failures: int = 0

    @property
    def N(self):
        return int(self.replicates.size)

    def as_dict(self):
        return {
            "family": self.family,
            "statistic": self.statistic,
            "method": self.method,
            "observed": self.observed,
            "pvalue": self.pvalue,
            "N": self.N,
            "failures": self.failures,
            "seed": self.seed,
            "wall_time": self.wall_time,
            "theta_n": None if self.theta_n is None else [float(v) for v in self.theta_n],
        }


def _check_n(N):
    if int(N) < MIN_REPLICATES:
        raise ValueError(f"at least {MIN_REPLICATES} replicates are required, got {N}")
    return int(N)


def _rng(rng, seed):
    if rng is not None:
        return rng
    return stream(0 if seed is None else seed)


def multiplier_test(family, data, statistic="Sn*", N=1000, rng=None, config=None, *, seed=None,
                    weights="normal", m=DEFAULT_GRID, corrected=False, fit=None):
    """Multiplier goodness-of-fit test of ``family`` on ``data``.

    Parameters
    ----------
    rng : numpy Generator, optional
        Source of the multipliers; defaults to a Philox stream from ``seed``.
    config : FitConfig, optional
        Fitting options; ``use_analytic_grads`` also switches the CDF gradient
        to the analytic path for multivariate t families.
    fit : FitResult, optional
        Reuse an existing fit of ``family`` to ``data``.
    """
    N = _check_n(N)
    t0 = time.perf_counter()
    config = config or FitConfig()
    statistic = normalize_statistic(statistic)
    data = as_points(data, family.dim)
    fit = fit or fit_mle(family, data, config)
    ctx = build_context(family, data, fit, statistic, m=m, analytic=config.use_analytic_grads)
    observed = statistic_observed(ctx)
    rng = _rng(rng, seed)
    gen = MultiplierWeights(weights)
    reps = np.empty(N)
    for start in range(0, N, BATCH):
        b = min(BATCH, N - start)
        reps[start:start + b] = multiplier_replicate(ctx, gen.draw(rng, (b, ctx.n)))
    return GofResult(statistic, observed, reps, pvalue(observed, reps, corrected), "MP", seed,
                     time.perf_counter() - t0, family.name, fit.theta_n)


def bootstrap_statistic(family, data, theta, statistic, m=DEFAULT_GRID):
    """Statistic for ``data`` against F_theta, without multiplier objects."""
    ctx = build_context(family, data, theta, statistic, m=m, multiplier=False)
    return statistic_observed(ctx)


def parametric_bootstrap_test(family, data, statistic="Sn*", N=1000, rng=None, config=None, *, seed=None,
                              m=DEFAULT_GRID, corrected=False, fit=None):
    """Parametric bootstrap goodness-of-fit test.

    Each replicate simulates n points from the fitted law, refits and
    recomputes the statistic.  Replicates draw from their own substreams of
    ``rng`` (or of ``seed``).  Failed refits are dropped from the p-value; more
    than 2% failures raise ReplicateFailure.
    """
    N = _check_n(N)
    t0 = time.perf_counter()
    config = config or FitConfig()
    statistic = normalize_statistic(statistic)
    data = as_points(data, family.dim)
    n = data.shape[0]
    fit = fit or fit_mle(family, data, config, with_influence=False)
    theta = fit.theta_n
    observed = bootstrap_statistic(family, data, theta, statistic, m)
    if rng is not None:
        base = int(rng.integers(0, 2**63))
        streams = (stream(base, k) for k in range(N))
    else:
        s = 0 if seed is None else seed
        streams = (stream(s, k) for k in range(N))
    reps = []
    failures = 0
    for gen in streams:
        sample = family.sample(theta, n, gen)
        try:
            refit = fit_mle(family, sample, config, with_influence=False)
            value = bootstrap_statistic(family, sample, refit.theta_n, statistic, m)
        except FIT_ERRORS:
            failures += 1
            if failures > MAX_FAILURE_FRACTION * N:
                raise ReplicateFailure(
                    f"more than {MAX_FAILURE_FRACTION:.0%} of bootstrap refits failed", failures, N
                ) from None
            continue
        reps.append(value)
    reps = np.array(reps)
    return GofResult(statistic, observed, reps, pvalue(observed, reps, corrected), "PB", seed,
                     time.perf_counter() - t0, family.name, theta, failures)


def gof_test(family, data, statistic="Sn*", method="MP", N=1000, **kwargs):
    method = method.upper()
    if method == "MP":
        return multiplier_test(family, data, statistic, N, **kwargs)
    if method == "PB":
        return parametric_bootstrap_test(family, data, statistic, N, **kwargs)
    raise ValueError("method must be 'MP' or 'PB'")
