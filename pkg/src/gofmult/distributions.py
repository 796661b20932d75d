"""Parametric families: univariate N, t (fixed d.f.), logistic, gamma, Weibull,
and the multivariate normal / multivariate t (fixed d.f.) for d <= 3.

Every family works on points stored as a 2-D array of shape (m, d).  Parameter
vectors are flat numpy arrays in the family's natural parametrization:

* normal and t: location and squared dispersion (mean, variance for N);
* logistic: location and scale;
* gamma: shape and rate;
* Weibull: shape and scale;
* multivariate normal / t: (mu_1..mu_d, lambda2_1..lambda2_d, rho_12, rho_13, rho_23).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize, special

from . import mvcdf
from .errors import DegenerateData, DomainError

EULER_GAMMA = 0.5772156649015329
PIVOT_TOL = 1e-12

# parameter kinds drive the optimizer's unconstrained transform
REAL, POSITIVE, CORR = "real", "positive", "corr"


def as_points(x, dim):
    """Coerce ``x`` to a float array of shape (m, dim)."""
    x = np.asarray(x, dtype=float)
    if dim == 1 and x.ndim <= 1:
        return x.reshape(-1, 1)
    x = np.atleast_2d(x)
    if x.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


def corr_pairs(d):
    """Upper-triangle index pairs in canonical order (12, 13, 23)."""
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


def corr_from_vector(rho, d):
    R = np.eye(d)
    for value, (i, j) in zip(rho, corr_pairs(d)):
        R[i, j] = R[j, i] = value
    return R


def corr_to_vector(R):
    return np.array([R[i, j] for i, j in corr_pairs(R.shape[0])])


def check_corr(R):
    """Cholesky factor of ``R``; raises DomainError unless R is PD with unit diagonal."""
    d = R.shape[0]
    if not np.allclose(np.diag(R), 1.0) or np.any(np.abs(R[np.triu_indices(d, 1)]) >= 1.0):
        raise DomainError("correlation entries must lie in (-1, 1)")
    L = np.zeros_like(R)
    for j in range(d):
        pivot = R[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= PIVOT_TOL:
            raise DomainError("correlation matrix is not positive definite")
        L[j, j] = math.sqrt(pivot)
        for i in range(j + 1, d):
            L[i, j] = (R[i, j] - L[i, :j] @ L[j, :j]) / L[j, j]
    return L


def nearest_corr(R, floor=1e-6):
    """Project a symmetric matrix to a PD correlation matrix by eigenvalue clipping."""
    vals, vecs = np.linalg.eigh((R + R.T) / 2.0)
    S = vecs @ np.diag(np.maximum(vals, floor)) @ vecs.T
    s = np.sqrt(np.diag(S))
    out = S / np.outer(s, s)
    np.fill_diagonal(out, 1.0)
    return out


def _check_variance(data):
    sd = data.std(axis=0)
    if np.any(~np.isfinite(sd)) or np.any(sd <= 0.0):
        raise DegenerateData("sample variance is zero in at least one coordinate")
    return sd


class Family:
    """A parametric family of distributions on R^d.

    Subclasses provide ``logpdf``, ``cdf``, ``sample`` and ``moment_start``;
    univariate families also provide ``ppf``.  ``param_kinds`` lists, for each
    parameter, whether it is unrestricted, positive, or a correlation.
    """

    name = "family"
    dim = 1
    param_names: tuple = ()
    param_kinds: tuple = ()
    fixed_constants: dict = {}

    @property
    def param_count(self):
        return len(self.param_names)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"

    # --- domain -----------------------------------------------------------

    def check(self, theta):
        theta = np.asarray(theta, dtype=float).ravel()
        if theta.shape != (self.param_count,):
            raise DomainError(f"{self.name} expects {self.param_count} parameters, got {theta.size}")
        if not np.all(np.isfinite(theta)):
            raise DomainError("parameters must be finite")
        for value, kind, label in zip(theta, self.param_kinds, self.param_names):
            if kind == POSITIVE and value <= 0.0:
                raise DomainError(f"{label} must be positive")
        return theta

    def to_free(self, theta):
        """Map natural parameters to unconstrained optimizer coordinates."""
        theta = self.check(theta)
        out = theta.copy()
        for i, kind in enumerate(self.param_kinds):
            if kind == POSITIVE:
                out[i] = math.log(theta[i])
            elif kind == CORR:
                out[i] = math.atanh(theta[i])
        return out

    def from_free(self, eta):
        eta = np.asarray(eta, dtype=float)
        out = eta.copy()
        for i, kind in enumerate(self.param_kinds):
            if kind == POSITIVE:
                out[i] = math.exp(min(eta[i], 700.0))
            elif kind == CORR:
                out[i] = math.tanh(eta[i])
        return out

    def in_domain(self, theta):
        try:
            self.check(theta)
        except DomainError:
            return False
        return True

    # --- optional capabilities --------------------------------------------

    def closed_form_mle(self, data):
        """Closed-form MLE when one exists, else None."""
        return None

    def score(self, theta, x):
        """Analytic per-point gradient of logpdf, or None for the numeric path."""
        return None

    def cdf_grad(self, theta, x):
        """Analytic per-point gradient of the CDF, or None for the numeric path."""
        return None

    def loglik(self, theta, data):
        return float(np.sum(self.logpdf(theta, data)))


# ---------------------------------------------------------------------------
# univariate families
# ---------------------------------------------------------------------------


class Univariate(Family):
    dim = 1

    def _x(self, x):
        return as_points(x, 1)[:, 0]

    def ppf(self, theta, u, tol=1e-12):
        """Quantiles by safeguarded Newton steps inside a bisection bracket.

        Iterates until the CDF residual is below ``tol`` relative to the tail
        probability min(u, 1 - u), or the bracket has collapsed.

        Families with analytic quantiles override this.
        """
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        lo = np.full(flat.shape, -1.0)
        hi = np.full(flat.shape, 1.0)
        while np.any(self.cdf(theta, lo) > flat):
            lo = np.where(self.cdf(theta, lo) > flat, 2.0 * lo, lo)
        while np.any(self.cdf(theta, hi) < flat):
            hi = np.where(self.cdf(theta, hi) < flat, 2.0 * hi, hi)
        x = (lo + hi) / 2.0
        for _ in range(200):
            fx = self.cdf(theta, x) - flat
            lo = np.where(fx < 0, x, lo)
            hi = np.where(fx >= 0, x, hi)
            dens = np.exp(self.logpdf(theta, x))
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = x - fx / dens
            inside = np.isfinite(newton) & (newton > lo) & (newton < hi)
            done = np.abs(fx) <= tol * np.minimum(flat, 1.0 - flat)
            x = np.where(done, x, np.where(inside, newton, (lo + hi) / 2.0))
            if np.all(done | (hi - lo <= tol * (1.0 + np.abs(x)))):
                break
        return x.reshape(u.shape)

    def sample(self, theta, n, rng):
        theta = self.check(theta)
        return self._draw(theta, int(n), rng).reshape(-1, 1)


class Normal(Univariate):
    name = "norm"
    param_names = ("mean", "var")
    param_kinds = (REAL, POSITIVE)

    def logpdf(self, theta, x):
        mu, var = self.check(theta)
        z = self._x(x) - mu
        return -0.5 * (math.log(2.0 * math.pi * var) + z * z / var)

    def cdf(self, theta, x):
        mu, var = self.check(theta)
        return special.ndtr((self._x(x) - mu) / math.sqrt(var))

    def ppf(self, theta, u):
        mu, var = self.check(theta)
        return mu + math.sqrt(var) * special.ndtri(u)

    def _draw(self, theta, n, rng):
        return theta[0] + math.sqrt(theta[1]) * rng.standard_normal(n)

    def moment_start(self, data):
        x = as_points(data, 1)[:, 0]
        _check_variance(x[:, None])
        return np.array([x.mean(), x.var(ddof=1)])

    def closed_form_mle(self, data):
        x = as_points(data, 1)[:, 0]
        _check_variance(x[:, None])
        return np.array([x.mean(), x.var()])

    def score(self, theta, x):
        mu, var = self.check(theta)
        z = self._x(x) - mu
        return np.column_stack([z / var, -0.5 / var + 0.5 * z * z / (var * var)])


class StudentT(Univariate):
    """Location/dispersion t with fixed degrees of freedom ``nu``."""

    param_names = ("loc", "disp2")
    param_kinds = (REAL, POSITIVE)

    def __init__(self, nu):
        if not nu > 0:
            raise DomainError("degrees of freedom must be positive")
        self.nu = float(nu)
        self.name = f"t{nu:g}"
        self.fixed_constants = {"nu": self.nu}

    def logpdf(self, theta, x):
        mu, l2 = self.check(theta)
        z = (self._x(x) - mu) / math.sqrt(l2)
        return mvcdf.t_logpdf(z, self.nu) - 0.5 * math.log(l2)

    def cdf(self, theta, x):
        mu, l2 = self.check(theta)
        return special.stdtr(self.nu, (self._x(x) - mu) / math.sqrt(l2))

    def ppf(self, theta, u):
        mu, l2 = self.check(theta)
        return mu + math.sqrt(l2) * special.stdtrit(self.nu, u)

    def _draw(self, theta, n, rng):
        return theta[0] + math.sqrt(theta[1]) * rng.standard_t(self.nu, n)

    def moment_start(self, data):
        x = as_points(data, 1)[:, 0]
        _check_variance(x[:, None])
        if self.nu > 2.0:
            l2 = x.var(ddof=1) * (self.nu - 2.0) / self.nu
        else:
            q1, q3 = np.quantile(x, [0.25, 0.75])
            l2 = ((q3 - q1) / (2.0 * special.stdtrit(self.nu, 0.75))) ** 2
        return np.array([x.mean(), l2])


class Logistic(Univariate):
    name = "logis"
    param_names = ("location", "scale")
    param_kinds = (REAL, POSITIVE)

    def logpdf(self, theta, x):
        loc, s = self.check(theta)
        z = (self._x(x) - loc) / s
        return -z - 2.0 * np.logaddexp(0.0, -z) - math.log(s)

    def cdf(self, theta, x):
        loc, s = self.check(theta)
        return special.expit((self._x(x) - loc) / s)

    def ppf(self, theta, u):
        loc, s = self.check(theta)
        return loc + s * special.logit(u)

    def _draw(self, theta, n, rng):
        return rng.logistic(theta[0], theta[1], n)

    def moment_start(self, data):
        x = as_points(data, 1)[:, 0]
        _check_variance(x[:, None])
        return np.array([x.mean(), x.std(ddof=1) * math.sqrt(3.0) / math.pi])


class Gamma(Univariate):
    name = "gamma"
    param_names = ("shape", "rate")
    param_kinds = (POSITIVE, POSITIVE)

    def logpdf(self, theta, x):
        a, b = self.check(theta)
        x = self._x(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = a * math.log(b) - special.gammaln(a) + (a - 1.0) * np.log(x) - b * x
        return np.where(x > 0, out, -np.inf)

    def cdf(self, theta, x):
        a, b = self.check(theta)
        return special.gammainc(a, b * np.maximum(self._x(x), 0.0))

    def ppf(self, theta, u):
        a, b = self.check(theta)
        return special.gammaincinv(a, u) / b

    def _draw(self, theta, n, rng):
        return rng.gamma(theta[0], 1.0 / theta[1], n)

    def moment_start(self, data):
        x = as_points(data, 1)[:, 0]
        _check_variance(x[:, None])
        m, v = x.mean(), x.var(ddof=1)
        if m <= 0.0:
            raise DegenerateData("gamma start needs a positive sample mean")
        return np.array([m * m / v, m / v])

    def closed_form_mle(self, data):
        # profile equation log(a) - digamma(a) = log(mean) - mean(log x), rate = a / mean
        x = as_points(data, 1)[:, 0]
        _check_variance(x[:, None])
        if np.any(x <= 0.0):
            return None
        m = x.mean()
        c = math.log(m) - np.log(x).mean()
        if not c > 0.0:
            return None

        def eq(la):
            return la - special.digamma(math.exp(la)) - c

        try:
            la = optimize.brentq(eq, -30.0, 30.0, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        except ValueError:
            return None
        a = math.exp(la)
        return np.array([a, a / m])


class Weibull(Univariate):
    name = "weibull"
    param_names = ("shape", "scale")
    param_kinds = (POSITIVE, POSITIVE)

    def logpdf(self, theta, x):
        k, lam = self.check(theta)
        x = self._x(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = x / lam
            out = math.log(k / lam) + (k - 1.0) * np.log(z) - z**k
        return np.where(x > 0, out, -np.inf)

    def cdf(self, theta, x):
        k, lam = self.check(theta)
        z = np.maximum(self._x(x), 0.0) / lam
        return -np.expm1(-(z**k))

    def ppf(self, theta, u):
        k, lam = self.check(theta)
        return lam * (-np.log1p(-np.asarray(u, dtype=float))) ** (1.0 / k)

    def _draw(self, theta, n, rng):
        return theta[1] * rng.weibull(theta[0], n)

    def moment_start(self, data):
        # log X = log(scale) + log(E)/shape with E ~ Exp(1)
        x = as_points(data, 1)[:, 0]
        _check_variance(x[:, None])
        if np.any(x <= 0.0):
            raise DegenerateData("Weibull start needs strictly positive data")
        lx = np.log(x)
        sd = lx.std(ddof=1)
        if sd <= 0.0:
            raise DegenerateData("zero variance of log data")
        k = math.pi / (sd * math.sqrt(6.0))
        return np.array([k, math.exp(lx.mean() + EULER_GAMMA / k)])

    def closed_form_mle(self, data):
        # profile equation in log(shape); scale = mean(x^k)^(1/k)
        x = as_points(data, 1)[:, 0]
        _check_variance(x[:, None])
        if np.any(x <= 0.0):
            return None
        lx = np.log(x)
        lx = lx - lx.max()  # scale invariance keeps x^k bounded
        mlx = lx.mean()

        def eq(lk):
            k = math.exp(lk)
            w = np.exp(k * lx)
            return np.sum(w * lx) / np.sum(w) - 1.0 / k - mlx

        try:
            lk = optimize.brentq(eq, -20.0, 20.0, xtol=1e-14, rtol=4 * np.finfo(float).eps)
        except ValueError:
            return None
        k = math.exp(lk)
        scale = math.exp(np.log(x).max()) * np.mean(np.exp(k * lx)) ** (1.0 / k)
        return np.array([k, scale])


# ---------------------------------------------------------------------------
# multivariate elliptical families
# ---------------------------------------------------------------------------


class Elliptical(Family):
    """Location/dispersion/correlation family; ``nu = inf`` gives the normal."""

    def __init__(self, dim, nu=math.inf):
        if dim not in (1, 2, 3):
            raise DomainError("only dimensions 1 to 3 are supported")
        if not nu > 0:
            raise DomainError("degrees of freedom must be positive")
        self.dim = dim
        self.nu = float(nu)
        pairs = corr_pairs(dim)
        self.param_names = (
            tuple(f"mu{j + 1}" for j in range(dim))
            + tuple(f"lambda2_{j + 1}" for j in range(dim))
            + tuple(f"rho{i + 1}{j + 1}" for i, j in pairs)
        )
        self.param_kinds = (REAL,) * dim + (POSITIVE,) * dim + (CORR,) * len(pairs)
        self.fixed_constants = {} if math.isinf(self.nu) else {"nu": self.nu}

    def unpack(self, theta):
        """Return ``(mu, lambda2, R, chol(R))`` after validating ``theta``."""
        theta = self.check(theta)
        d = self.dim
        R = corr_from_vector(theta[2 * d:], d)
        L = check_corr(R)
        return theta[:d], theta[d:2 * d], R, L

    def pack(self, mu, lambda2, R):
        return np.concatenate([mu, lambda2, corr_to_vector(R)])

    def check(self, theta):
        theta = super().check(theta)
        check_corr(corr_from_vector(theta[2 * self.dim:], self.dim))
        return theta

    def standardize(self, theta, x):
        mu, l2, R, L = self.unpack(theta)
        return (as_points(x, self.dim) - mu) / np.sqrt(l2), R, L, l2

    def logpdf(self, theta, x):
        z, R, L, l2 = self.standardize(theta, x)
        d = self.dim
        y = np.linalg.solve(L, z.T)  # L^{-1} z
        q = np.sum(y * y, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(L))) + np.sum(np.log(l2))
        if math.isinf(self.nu):
            return -0.5 * (d * math.log(2.0 * math.pi) + logdet + q)
        nu = self.nu
        c = special.gammaln((nu + d) / 2.0) - special.gammaln(nu / 2.0) - 0.5 * d * math.log(nu * math.pi)
        return c - 0.5 * logdet - (nu + d) / 2.0 * np.log1p(q / nu)

    def cdf(self, theta, x):
        z, R, _, _ = self.standardize(theta, x)
        return mvcdf.mvt_cdf(z, R, self.nu)

    def sample(self, theta, n, rng):
        # X = mu + lambda * (Z chol(R)^T) / sqrt(W / nu)
        mu, l2, R, L = self.unpack(theta)
        z = rng.standard_normal((int(n), self.dim)) @ L.T
        if not math.isinf(self.nu):
            w = rng.chisquare(self.nu, int(n))
            z = z / np.sqrt(w / self.nu)[:, None]
        return mu + np.sqrt(l2) * z

    def moment_start(self, data):
        x = as_points(data, self.dim)
        sd = _check_variance(x)
        R = np.corrcoef(x, rowvar=False) if self.dim > 1 else np.eye(1)
        try:
            check_corr(R)
        except DomainError:
            R = nearest_corr(R)
        var = sd**2 * len(x) / max(len(x) - 1, 1)
        if not math.isinf(self.nu):
            if self.nu > 2.0:
                var = var * (self.nu - 2.0) / self.nu
            else:
                q1, q3 = np.quantile(x, [0.25, 0.75], axis=0)
                var = ((q3 - q1) / (2.0 * special.stdtrit(self.nu, 0.75))) ** 2
        return self.pack(x.mean(axis=0), var, R)

    def ppf(self, theta, u):
        if self.dim != 1:
            raise NotImplementedError("quantiles exist only for d = 1")
        mu, l2, _, _ = self.unpack(theta)
        return mu[0] + math.sqrt(l2[0]) * mvcdf.t_ppf(u, self.nu)


class MultivariateNormal(Elliptical):
    def __init__(self, dim):
        super().__init__(dim, math.inf)
        self.name = "mvnorm"

    def closed_form_mle(self, data):
        x = as_points(data, self.dim)
        sd = _check_variance(x)
        R = np.corrcoef(x, rowvar=False) if self.dim > 1 else np.eye(1)
        check_corr(R)
        return self.pack(x.mean(axis=0), sd**2, R)


class MultivariateT(Elliptical):
    """Multivariate t with fixed ``nu``; analytic gradients available."""

    def __init__(self, dim, nu):
        super().__init__(dim, nu)
        self.name = f"mvt{nu:g}"

    def score(self, theta, x):
        from .mvt_analytic import MvtParams, mvt_logpdf_grad

        return mvt_logpdf_grad(MvtParams.from_theta(self, theta), x)

    def cdf_grad(self, theta, x):
        from .mvt_analytic import MvtParams, mvt_cdf_grad

        return mvt_cdf_grad(MvtParams.from_theta(self, theta), x)
