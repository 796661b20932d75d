"""Multivariate families built from a copula and univariate margins.

F(x) = C(F_1(x_1), ..., F_d(x_d)) with a normal, t (fixed d.f.) or Clayton
copula C.  Parameters are laid out as margin 1, ..., margin d, then copula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from . import mvcdf
from .distributions import (
    CORR,
    POSITIVE,
    Family,
    as_points,
    check_corr,
    corr_from_vector,
    corr_pairs,
    corr_to_vector,
    nearest_corr,
)
from .errors import DomainError

KINDS = ("normal", "clayton", "t")


@dataclass(frozen=True)
class CopulaSpec:
    kind: str
    dim: int
    nu: float = math.inf

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown copula kind {self.kind!r}")
        if self.dim not in (2, 3):
            raise DomainError("copula dimension must be 2 or 3")
        if self.kind == "t" and not self.nu > 0:
            raise DomainError("t copula needs positive degrees of freedom")

    @property
    def param_count(self):
        return 1 if self.kind == "clayton" else len(corr_pairs(self.dim))

    @property
    def param_names(self):
        if self.kind == "clayton":
            return ("theta_c",)
        return tuple(f"rho{i + 1}{j + 1}" for i, j in corr_pairs(self.dim))

    @property
    def param_kinds(self):
        return (POSITIVE,) if self.kind == "clayton" else (CORR,) * self.param_count

    @property
    def _nu(self):
        return self.nu if self.kind == "t" else math.inf

    def check(self, params):
        params = np.asarray(params, dtype=float)
        if self.kind == "clayton":
            if not params[0] > 0:
                raise DomainError("Clayton parameter must be positive")
            return None
        R = corr_from_vector(params, self.dim)
        check_corr(R)
        return R

    # --- CDF, density, sampling on the unit cube ---------------------------

    def cdf(self, params, u):
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        R = self.check(params)
        if self.kind == "clayton":
            theta = float(params[0])
            with np.errstate(divide="ignore"):
                lu = np.log(u)
            # log C = -(1/theta) log(1 + sum(u^-theta - 1)), stable as theta -> 0
            s = np.sum(np.expm1(-theta * lu), axis=1)
            with np.errstate(over="ignore", invalid="ignore"):
                out = np.exp(-np.log1p(s) / theta)
            out = np.where(np.any(u <= 0.0, axis=1), 0.0, out)
            return np.nan_to_num(out, nan=0.0)
        z = mvcdf.t_ppf(u, self._nu)
        return mvcdf.mvt_cdf(z, R, self._nu)

    def logpdf(self, params, u):
        u = np.asarray(u, dtype=float)
        R = self.check(params)
        d = self.dim
        if self.kind == "clayton":
            theta = float(params[0])
            with np.errstate(divide="ignore"):
                lu = np.log(u)
            s = np.sum(np.expm1(-theta * lu), axis=1)
            const = sum(math.log1p(k * theta) for k in range(1, d))
            return const - (theta + 1.0) * lu.sum(axis=1) - (1.0 / theta + d) * np.log1p(s)
        nu = self._nu
        z = mvcdf.t_ppf(u, nu)
        Rinv = np.linalg.inv(R)
        q = np.einsum("ni,ij,nj->n", z, Rinv, z)
        logdet = np.linalg.slogdet(R)[1]
        if math.isinf(nu):
            return -0.5 * logdet - 0.5 * (q - np.sum(z * z, axis=1))
        c = special.gammaln((nu + d) / 2.0) - special.gammaln(nu / 2.0) - 0.5 * d * math.log(nu * math.pi)
        joint = c - 0.5 * logdet - (nu + d) / 2.0 * np.log1p(q / nu)
        return joint - np.sum(mvcdf.t_logpdf(z, nu), axis=1)

    def sample(self, params, n, rng):
        R = self.check(params)
        d = self.dim
        if self.kind == "clayton":
            # Marshall-Olkin: frailty V ~ Gamma(1/theta), U_j = (1 + E_j / V)^(-1/theta)
            theta = float(params[0])
            v = rng.gamma(1.0 / theta, 1.0, n)
            e = rng.standard_exponential((n, d))
            return np.exp(-np.log1p(e / v[:, None]) / theta)
        L = np.linalg.cholesky(R)
        z = rng.standard_normal((n, d)) @ L.T
        if self.kind == "t":
            z = z / np.sqrt(rng.chisquare(self.nu, n) / self.nu)[:, None]
        return mvcdf.t_cdf(z, self._nu)

    def start(self, u):
        """Starting copula parameters from pseudo-observations via Kendall's tau."""
        d = self.dim
        taus = [stats.kendalltau(u[:, i], u[:, j])[0] for i, j in corr_pairs(d)]
        if self.kind == "clayton":
            tau = min(max(float(np.mean(taus)), 0.05), 0.95)
            return np.array([2.0 * tau / (1.0 - tau)])
        R = corr_from_vector(np.sin(np.pi * np.asarray(taus) / 2.0), d)
        try:
            check_corr(R)
        except DomainError:
            R = nearest_corr(R)
        return corr_to_vector(R)


class SklarFamily(Family):
    """Composite family with univariate ``margins`` glued by ``copula``."""

    def __init__(self, copula: CopulaSpec, margins, name=None):
        margins = list(margins)
        if len(margins) != copula.dim:
            raise DomainError("number of margins must equal the copula dimension")
        if any(m.dim != 1 for m in margins):
            raise DomainError("margins must be univariate")
        self.copula = copula
        self.margins = margins
        self.dim = copula.dim
        self.name = name or f"sklar[{copula.kind}]"
        slices, start = [], 0
        for m in margins:
            slices.append(slice(start, start + m.param_count))
            start += m.param_count
        self.slices = slices
        self.copula_slice = slice(start, start + copula.param_count)
        self.param_names = tuple(
            f"{p}_{j + 1}" for j, m in enumerate(margins) for p in m.param_names
        ) + copula.param_names
        self.param_kinds = tuple(k for m in margins for k in m.param_kinds) + copula.param_kinds
        self.fixed_constants = {"nu": copula.nu} if copula.kind == "t" else {}

    def check(self, theta):
        theta = super().check(theta)
        for m, sl in zip(self.margins, self.slices):
            m.check(theta[sl])
        self.copula.check(theta[self.copula_slice])
        return theta

    def _margin_cdfs(self, theta, x):
        return np.column_stack([m.cdf(theta[sl], x[:, j]) for j, (m, sl) in enumerate(zip(self.margins, self.slices))])

    def cdf(self, theta, x):
        theta = self.check(theta)
        x = as_points(x, self.dim)
        return self.copula.cdf(theta[self.copula_slice], self._margin_cdfs(theta, x))

    def logpdf(self, theta, x):
        theta = self.check(theta)
        x = as_points(x, self.dim)
        marg = sum(m.logpdf(theta[sl], x[:, j]) for j, (m, sl) in enumerate(zip(self.margins, self.slices)))
        u = self._margin_cdfs(theta, x)
        inside = np.all((u > 0.0) & (u < 1.0), axis=1) & np.isfinite(marg)
        out = np.full(x.shape[0], -np.inf)
        if inside.any():
            out[inside] = marg[inside] + self.copula.logpdf(theta[self.copula_slice], u[inside])
        return out

    def sample(self, theta, n, rng):
        theta = self.check(theta)
        u = self.copula.sample(theta[self.copula_slice], int(n), rng)
        return np.column_stack([m.ppf(theta[sl], u[:, j]) for j, (m, sl) in enumerate(zip(self.margins, self.slices))])

    def moment_start(self, data):
        x = as_points(data, self.dim)
        parts = [m.moment_start(x[:, j]) for j, m in enumerate(self.margins)]
        ranks = stats.rankdata(x, axis=0) / (x.shape[0] + 1.0)
        parts.append(self.copula.start(ranks))
        return np.concatenate(parts)
