"""Analytic gradients of the multivariate t CDF and log-density.

Gradients are taken with respect to (mu_1..mu_d, lambda2_1..lambda2_d,
rho_12, rho_13, rho_23); the degrees of freedom stay fixed.  The infinite
``nu`` limit (multivariate normal) is supported by the same code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mvcdf
from .distributions import as_points, check_corr, corr_from_vector, corr_pairs
from .errors import DomainError


@dataclass(frozen=True)
class MvtParams:
    mu: np.ndarray
    lambda2: np.ndarray
    corr: np.ndarray
    nu: float

    def __post_init__(self):
        d = len(self.mu)
        if d not in (2, 3):
            raise DomainError("analytic gradients are implemented for d = 2 and 3")
        if np.any(np.asarray(self.lambda2) <= 0):
            raise DomainError("squared dispersions must be positive")
        check_corr(np.asarray(self.corr, dtype=float))

    @property
    def dim(self):
        return len(self.mu)

    @classmethod
    def from_theta(cls, family, theta):
        theta = family.check(theta)
        d = family.dim
        return cls(theta[:d], theta[d:2 * d], corr_from_vector(theta[2 * d:], d), family.nu)

    def standardize(self, x):
        return (as_points(x, self.dim) - self.mu) / np.sqrt(self.lambda2)


def cofactor(R, i, j):
    """Cofactor of entry (i, j) from the explicit 2x2/3x3 adjugate."""
    d = R.shape[0]
    if d == 2:
        return -R[1 - i, 1 - j] if i != j else R[1 - i, 1 - j]
    rows = [r for r in range(3) if r != i]
    cols = [c for c in range(3) if c != j]
    minor = R[rows[0], cols[0]] * R[rows[1], cols[1]] - R[rows[0], cols[1]] * R[rows[1], cols[0]]
    return (-1) ** (i + j) * minor


def _det(R):
    if R.shape[0] == 2:
        return R[0, 0] * R[1, 1] - R[0, 1] * R[1, 0]
    return sum(R[0, j] * cofactor(R, 0, j) for j in range(3))


def cdf_partial(z, R, nu, j):
    """Partial derivative of the standard CDF in coordinate ``j``.

    Conditionally on X_j = z_j, the remaining coordinates (after removing
    z_j * R[-j, j] and rescaling) follow a centered t with ``nu + 1`` degrees
    of freedom, so the partial is t_nu(z_j) times a (d-1)-dimensional CDF.
    """
    others, beta, disp = mvcdf.conditional_law(R, j)
    zc, ccorr = mvcdf.conditional_upper(z[:, j], z[:, others], beta, disp, nu)
    sub_nu = nu if math.isinf(nu) else nu + 1.0
    return mvcdf.t_pdf(z[:, j], nu) * mvcdf._std_cdf(zc, ccorr, sub_nu)


def cdf_rho_partial(z, R, nu, i, j):
    """Derivative of the standard CDF with respect to the correlation rho_ij.

    Plackett's identity for the normal, extended to the t through its
    normal scale-mixture representation: the bivariate factor becomes
    (1 + q/nu)^(-nu/2) / (2 pi sqrt(1 - rho^2)) and, for d = 3, the remaining
    coordinate enters through a univariate t CDF with ``nu`` degrees of freedom.
    """
    rho = R[i, j]
    zi, zj = z[:, i], z[:, j]
    ors = 1.0 - rho * rho
    q = (zi * zi - 2.0 * rho * zi * zj + zj * zj) / ors
    if math.isinf(nu):
        dens = np.exp(-0.5 * q) / (2.0 * math.pi * math.sqrt(ors))
    else:
        dens = (1.0 + q / nu) ** (-nu / 2.0) / (2.0 * math.pi * math.sqrt(ors))
    if R.shape[0] == 2:
        return dens
    k = 3 - i - j
    Rinv = np.array([[1.0, -rho], [-rho, 1.0]]) / ors
    b = np.array([R[k, i], R[k, j]])
    mean = z[:, [i, j]] @ (Rinv @ b)
    resid = 1.0 - b @ Rinv @ b
    arg = (z[:, k] - mean) / math.sqrt(resid)
    if not math.isinf(nu):
        arg = arg * np.sqrt(nu / (nu + q))
    return dens * mvcdf.t_cdf(arg, nu)


def mvt_cdf_grad(params: MvtParams, x):
    """Gradient of the CDF at each row of ``x``; returns an (m, p) array."""
    z = params.standardize(x)
    R = np.asarray(params.corr, dtype=float)
    d = params.dim
    lam = np.sqrt(params.lambda2)
    cols = []
    partials = [cdf_partial(z, R, params.nu, j) for j in range(d)]
    for j in range(d):
        cols.append(-partials[j] / lam[j])
    for j in range(d):
        cols.append(-z[:, j] / (2.0 * params.lambda2[j]) * partials[j])
    for i, j in corr_pairs(d):
        cols.append(cdf_rho_partial(z, R, params.nu, i, j))
    return np.column_stack(cols)


def mvt_logpdf_grad(params: MvtParams, x):
    """Gradient of the log-density at each row of ``x``; returns an (m, p) array."""
    z = params.standardize(x)
    R = np.asarray(params.corr, dtype=float)
    d = params.dim
    nu = params.nu
    l2 = np.asarray(params.lambda2, dtype=float)
    Rinv = np.linalg.inv(R)
    rz = z @ Rinv  # row n holds (R^{-1} z_n)^T
    Q = np.sum(rz * z, axis=1)
    # ratio t^(j) / t for the standardized density
    if math.isinf(nu):
        weight = np.ones_like(Q)
    else:
        weight = (nu + d) / (nu + Q)
    ratio = -weight[:, None] * rz
    cols = [-ratio[:, j] / np.sqrt(l2[j]) for j in range(d)]
    cols += [-0.5 / l2[j] - z[:, j] / (2.0 * l2[j]) * ratio[:, j] for j in range(d)]
    det = _det(R)
    for i, j in corr_pairs(d):
        ddet = 2.0 * cofactor(R, i, j)
        # x^T dR^{-1} x with dR^{-1} = -r_i r_j^T - r_j r_i^T
        quad = -2.0 * rz[:, i] * rz[:, j]
        cols.append(-0.5 * (ddet / det + weight * quad))
    return np.column_stack(cols)
