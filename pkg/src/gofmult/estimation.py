"""Maximum-likelihood fitting, numerical differentiation and influence functions."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .distributions import as_points
from .errors import DomainError, NonConvergence, NumericalFailure, SingularInformation

log = logging.getLogger(__name__)

# default step settings (relative step, absolute step near zero, 4 halvings)
RICHARDSON_D = 1e-4
RICHARDSON_EPS = 1e-4
RICHARDSON_ZERO_TOL = float(np.sqrt(np.finfo(float).eps / 7e-7))
RICHARDSON_R = 4
RICHARDSON_V = 2.0
MAX_CONDITION = 1e12


@dataclass
class FitConfig:
    """Optimizer settings.

    ``scale_guard`` floors the per-parameter rescaling factors (the optimizer
    sees free parameters divided by ``max(|start|, scale_guard)``).
    ``closed_form`` uses a family's closed-form MLE when it has one;
    ``polish`` finishes the simplex search with a few safeguarded
    outer-product (BHHH) steps so that the score equations hold tightly.
    """

    max_iter: int | None = None
    rel_tol: float = 1e-8
    scale_guard: float = 1e-2
    use_analytic_grads: bool = False
    closed_form: bool = True
    polish: bool = True
    restarts: int = 2

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.scale_guard > 0:
            raise ValueError("scale_guard must be positive")


@dataclass
class FitResult:
    theta_n: np.ndarray
    loglik: float
    info: np.ndarray | None
    info_inv: np.ndarray | None
    scores: np.ndarray | None
    influence: np.ndarray | None
    converged: bool = True
    iterations: int = 0
    start: np.ndarray | None = field(default=None, repr=False)

    @property
    def std_errors(self):
        return np.sqrt(np.diag(self.info_inv) / self.scores.shape[0])


# ---------------------------------------------------------------------------
# numerical differentiation
# ---------------------------------------------------------------------------


def _finite(v):
    return np.all(np.isfinite(v))


def richardson_gradient(f, theta, *, in_domain=None, d=RICHARDSON_D, eps=RICHARDSON_EPS, r=RICHARDSON_R, v=RICHARDSON_V):
    """Gradient (or Jacobian) of ``f`` at ``theta`` by Richardson extrapolation.

    Central differences are taken at ``r`` step sizes shrinking by ``v`` and
    combined by Richardson extrapolation.  When a central difference would
    leave the domain (``in_domain`` returns False or ``f`` is not finite) the
    coordinate falls back to one-sided differences.

    Returns an array of shape (p,) for scalar ``f`` and (m, p) when ``f``
    returns an array of shape (m,).
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    h0 = np.abs(d * theta) + eps * (np.abs(theta) < RICHARDSON_ZERO_TOL)
    f0 = None
    columns = []
    for i in range(p):
        def step(hh, sign):
            t = theta.copy()
            t[i] += sign * hh
            if in_domain is not None and not in_domain(t):
                return None
            val = np.asarray(f(t), dtype=float)
            return val if _finite(val) else None

        h = h0[i]
        central = []
        for _ in range(r):
            up, dn = step(h, 1.0), step(h, -1.0)
            if up is None or dn is None:
                central = None
                break
            central.append((up - dn) / (2.0 * h))
            h /= v
        if central is not None:
            a = central
            for m in range(1, r):
                fac = 4.0**m
                a = [(fac * a[k + 1] - a[k]) / (fac - 1.0) for k in range(r - m)]
            columns.append(a[0])
            continue
        if f0 is None:
            f0 = np.asarray(f(theta), dtype=float)
            if not _finite(f0):
                raise NumericalFailure("function is not finite at the evaluation point")
        col = None
        for sign in (1.0, -1.0):
            h = h0[i]
            one = []
            for _ in range(r):
                val = step(h, sign)
                if val is None:
                    one = None
                    break
                one.append(sign * (val - f0) / h)
                h /= v
            if one is not None:
                a = one
                for m in range(1, r):
                    fac = v**m
                    a = [(fac * a[k + 1] - a[k]) / (fac - 1.0) for k in range(r - m)]
                col = a[0]
                break
        if col is None:
            raise NumericalFailure(f"no finite difference available for coordinate {i}")
        columns.append(col)
    out = np.array(columns)
    return out.T if out.ndim == 2 else out


# ---------------------------------------------------------------------------
# scores, information and influence
# ---------------------------------------------------------------------------


def score_matrix(family, theta, data, analytic=False):
    """Per-observation gradients of the log-density, shape (n, p)."""
    data = as_points(data, family.dim)
    if analytic:
        s = family.score(theta, data)
        if s is not None:
            return np.asarray(s, dtype=float)
    return richardson_gradient(lambda t: family.logpdf(t, data), theta, in_domain=family.in_domain)


def cdf_gradient(family, theta, points, analytic=False):
    """Gradient of F_theta at each point, shape (m, p)."""
    points = as_points(points, family.dim)
    if analytic:
        g = family.cdf_grad(theta, points)
        if g is not None:
            return np.asarray(g, dtype=float)
    g = richardson_gradient(lambda t: family.cdf(t, points), theta, in_domain=family.in_domain)
    return g.reshape(points.shape[0], -1)


def information_estimate(scores):
    """Sample covariance of the score rows and its inverse.

    Raises SingularInformation when the covariance is not positive definite
    or its condition number exceeds 1e12.
    """
    scores = np.asarray(scores, dtype=float)
    n, p = scores.shape
    if n <= p:
        raise SingularInformation("need more observations than parameters")
    if not _finite(scores):
        raise SingularInformation("non-finite scores")
    info = np.atleast_2d(np.cov(scores, rowvar=False))
    try:
        c, low = linalg.cho_factor(info)
    except linalg.LinAlgError:
        raise SingularInformation("information matrix is not positive definite") from None
    eig = np.linalg.eigvalsh(info)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_CONDITION:
        raise SingularInformation("information matrix is numerically singular")
    inv = linalg.cho_solve((c, low), np.eye(p))
    return info, (inv + inv.T) / 2.0


# ---------------------------------------------------------------------------
# maximum likelihood
# ---------------------------------------------------------------------------


def _nelder_mead(family, data, start, config):
    eta0 = family.to_free(start)
    scale = np.maximum(np.abs(eta0), config.scale_guard)
    p = eta0.size
    max_iter = config.max_iter or 2000 * p

    def objective(y):
        theta = family.from_free(y * scale)
        if not family.in_domain(theta):
            return np.inf
        ll = float(np.sum(family.logpdf(theta, data)))
        return -ll if np.isfinite(ll) else np.inf

    y = eta0 / scale
    f0 = objective(y)
    if not np.isfinite(f0):
        raise DomainError(f"log-likelihood is not finite at the starting values for {family.name}")
    total = 0
    converged = False
    best = f0
    for attempt in range(config.restarts + 1):
        step = 0.1 * max(np.max(np.abs(y)), 1.0) if attempt == 0 else 0.05 * max(np.max(np.abs(y)), 1.0)
        simplex = np.vstack([y] + [y + step * e for e in np.eye(p)])
        fatol = config.rel_tol * (abs(best) + config.rel_tol)
        res = optimize.minimize(
            objective,
            y,
            method="Nelder-Mead",
            options={
                "initial_simplex": simplex,
                "xatol": np.inf,
                "fatol": fatol,
                "maxiter": max_iter,
                "maxfev": 2 * max_iter,
            },
        )
        total += int(res.nit)
        converged = res.status == 0
        improved = best - res.fun
        y, best = res.x, res.fun
        if not converged or improved <= fatol:
            break
    return family.from_free(y * scale), -best, converged, total


def _polish(family, data, theta, loglik, config, steps=6):
    """Safeguarded BHHH iterations from the simplex optimum."""
    for _ in range(steps):
        try:
            s = score_matrix(family, theta, data, config.use_analytic_grads)
        except NumericalFailure:
            break
        g = s.sum(axis=0)
        opg = s.T @ s
        try:
            delta = linalg.solve(opg, g, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            break
        decrement = float(g @ delta)
        if not np.isfinite(decrement) or decrement < 1e-14:
            break
        t = 1.0
        accepted = False
        for _ in range(20):
            cand = theta + t * delta
            if family.in_domain(cand):
                ll = float(np.sum(family.logpdf(cand, data)))
                if np.isfinite(ll) and ll >= loglik - 1e-12 * abs(loglik):
                    theta, loglik, accepted = cand, ll, True
                    break
            t /= 2.0
        if not accepted:
            break
    return theta, loglik


def fit_mle(family, data, config=None, with_influence=True):
    """Maximum-likelihood fit with scores, information and influence rows.

    The search starts from method-of-moments values and runs a Nelder-Mead
    simplex in rescaled unconstrained coordinates (log for positive
    parameters, atanh for correlations).

    Raises
    ------
    DegenerateData
        The starting values cannot be computed.
    NonConvergence
        The simplex hit its iteration cap.
    SingularInformation
        The estimated information matrix is not positive definite.

    With ``with_influence=False`` only the point estimate is produced (scores,
    information and influence are left as None); parametric bootstrap refits
    use this.
    """
    config = config or FitConfig()
    data = as_points(data, family.dim)
    n = data.shape[0]
    if n <= family.param_count:
        raise SingularInformation("need more observations than parameters")
    if not np.all(np.isfinite(data)):
        raise DomainError("data must be finite")
    iterations = 0
    converged = True
    theta = family.closed_form_mle(data) if config.closed_form else None
    start = theta
    if theta is not None:
        loglik = family.loglik(theta, data)
    else:
        start = family.moment_start(data)
        theta, loglik, converged, iterations = _nelder_mead(family, data, start, config)
        if not converged:
            raise NonConvergence(f"Nelder-Mead hit the iteration cap for {family.name}")
        if config.polish:
            theta, loglik = _polish(family, data, theta, loglik, config)
    theta = family.check(theta)
    if not with_influence:
        return FitResult(theta, loglik, None, None, None, None, converged, iterations, start)
    scores = score_matrix(family, theta, data, config.use_analytic_grads)
    info, info_inv = information_estimate(scores)
    return FitResult(
        theta_n=theta,
        loglik=loglik,
        info=info,
        info_inv=info_inv,
        scores=scores,
        influence=scores @ info_inv,
        converged=converged,
        iterations=iterations,
        start=start,
    )
