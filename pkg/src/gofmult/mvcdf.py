"""Deterministic CDF kernels for standard bivariate/trivariate normal and t laws.

All routines take upper integration limits in standardized form (zero means,
unit variances) together with a correlation matrix, and are vectorized over
many limit vectors sharing one correlation matrix.  ``nu = inf`` encodes the
normal law.

Bivariate normal probabilities follow Drezner & Wesolowsky as refined by Genz;
bivariate t probabilities for integer degrees of freedom use the Dunnett-Sobel
finite series.  Everything else is reduced to a one-dimensional Gauss-Legendre
integral over the conditioning variable of a lower dimensional probability, so
results are fully reproducible (no randomized lattice rules).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

#: Gauss-Legendre nodes used by the outer conditioning integral.
OUTER_NODES = 256

#: exponent of the graded substitution in the conditioning integral.
GRADE = 3

#: |rho| beyond this is treated as the degenerate (rank deficient) limit.
RHO_CLAMP = 1.0 - 1e-10


@lru_cache(maxsize=None)
def _gauss_legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _is_normal(nu):
    return nu is None or math.isinf(nu)


def t_cdf(x, nu):
    """Univariate standard t (or normal when ``nu`` is infinite) CDF."""
    if _is_normal(nu):
        return special.ndtr(x)
    return special.stdtr(nu, x)


def t_ppf(u, nu):
    if _is_normal(nu):
        return special.ndtri(u)
    u = np.asarray(u, dtype=float)
    # stdtrit returns nan rather than the infinite endpoints
    out = np.where(u == 1.0, np.inf, np.where(u == 0.0, -np.inf, special.stdtrit(nu, u)))
    return out[()] if out.ndim == 0 else out


def t_logpdf(x, nu):
    x = np.asarray(x, dtype=float)
    if _is_normal(nu):
        return -0.5 * x * x - 0.5 * math.log(2.0 * math.pi)
    c = special.gammaln((nu + 1.0) / 2.0) - special.gammaln(nu / 2.0) - 0.5 * math.log(nu * math.pi)
    return c - (nu + 1.0) / 2.0 * np.log1p(x * x / nu)


def t_pdf(x, nu):
    return np.exp(t_logpdf(x, nu))


def bvt_pdf(h, k, rho, nu):
    """Density of the standard bivariate normal/t with correlation ``rho``."""
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    ors = 1.0 - rho * rho
    q = (h * h - 2.0 * rho * h * k + k * k) / ors
    if _is_normal(nu):
        return np.exp(-0.5 * q) / (2.0 * math.pi * math.sqrt(ors))
    return (1.0 + q / nu) ** (-(nu + 2.0) / 2.0) / (2.0 * math.pi * math.sqrt(ors))


# ---------------------------------------------------------------------------
# bivariate normal
# ---------------------------------------------------------------------------


def _bvnu(h, k, r):
    """P(X > h, Y > k) for finite h, k (Genz's BVNU, 20-point rule)."""
    x, w = _gauss_legendre(20)
    hk = h * k
    if abs(r) < 0.925:
        hs = (h * h + k * k) / 2.0
        asr = math.asin(r)
        sn = np.sin(asr * (x + 1.0) / 2.0)
        e = np.exp((sn[:, None] * hk[None, :] - hs[None, :]) / (1.0 - sn * sn)[:, None])
        bvn = (w @ e) * asr / (4.0 * math.pi)
        return bvn + special.ndtr(-h) * special.ndtr(-k)
    if r < 0:
        k = -k
        hk = -hk
    bvn = np.zeros_like(h)
    if abs(r) < 1.0:
        as_ = (1.0 - r) * (1.0 + r)
        a = math.sqrt(as_)
        bs = (h - k) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        bvn = a * np.exp(-(bs / as_ + hk) / 2.0) * (
            1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0
        )
        b = np.sqrt(bs)
        with np.errstate(over="ignore", invalid="ignore"):
            tail = np.exp(-hk / 2.0) * math.sqrt(2.0 * math.pi) * special.ndtr(-b / a) * b * (
                1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0
            )
        bvn = bvn - np.where(hk > -160.0, tail, 0.0)
        a = a / 2.0
        xs = (a * (x + 1.0)) ** 2
        rs = np.sqrt(1.0 - xs)
        xs_ = xs[:, None]
        rs_ = rs[:, None]
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            terms = np.exp(-bs[None, :] / (2.0 * xs_) - hk[None, :] / (1.0 + rs_)) / rs_ - np.exp(
                -(bs[None, :] / xs_ + hk[None, :]) / 2.0
            ) * (1.0 + c[None, :] * xs_ * (1.0 + d[None, :] * xs_))
        terms = np.where(np.isfinite(terms), terms, 0.0)
        bvn = bvn + a * (w @ terms)
        bvn = -bvn / (2.0 * math.pi)
    if r > 0:
        return bvn + special.ndtr(-np.maximum(h, k))
    lo = np.where(h < 0, special.ndtr(k) - special.ndtr(h), special.ndtr(-h) - special.ndtr(-k))
    return np.where(h >= k, -bvn, lo - bvn)


def bvn_cdf(h, k, rho):
    """Standard bivariate normal CDF P(X <= h, Y <= k) with correlation ``rho``.

    ``h`` and ``k`` broadcast against each other and may contain infinities.
    Absolute error is below 1e-12 in the bulk of the parameter space.
    """
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    shape = h.shape
    h = h.ravel()
    k = k.ravel()
    rho = float(np.clip(rho, -1.0, 1.0))
    out = np.empty(h.shape)
    lo = (h == -np.inf) | (k == -np.inf)
    hinf = (h == np.inf) & ~lo
    kinf = (k == np.inf) & ~lo & ~hinf
    fin = ~(lo | hinf | kinf)
    out[lo] = 0.0
    out[hinf] = special.ndtr(k[hinf])
    out[kinf] = special.ndtr(h[kinf])
    if fin.any():
        hf, kf = h[fin], k[fin]
        if rho >= RHO_CLAMP:
            val = special.ndtr(np.minimum(hf, kf))
        elif rho <= -RHO_CLAMP:
            val = np.maximum(special.ndtr(hf) - special.ndtr(-kf), 0.0)
        else:
            val = _bvnu(-hf, -kf, rho)
        out[fin] = val
    return np.clip(out, 0.0, 1.0).reshape(shape)


# ---------------------------------------------------------------------------
# bivariate t
# ---------------------------------------------------------------------------


def _bvtl_integer(nu, dh, dk, r):
    """Dunnett-Sobel series for integer ``nu`` (Genz's BVTL), finite dh, dk."""
    tpi = 2.0 * math.pi
    ors = 1.0 - r * r
    hrk = dh - r * dk
    krh = dk - r * dh
    xnhk = hrk**2 / (hrk**2 + ors * (nu + dk**2))
    xnkh = krh**2 / (krh**2 + ors * (nu + dh**2))
    hs = np.sign(hrk)
    ks = np.sign(krh)
    if nu % 2 == 0:
        bvt = np.full(dh.shape, math.atan2(math.sqrt(ors), -r) / tpi)
        gmph = dh / np.sqrt(16.0 * (nu + dh**2))
        gmpk = dk / np.sqrt(16.0 * (nu + dk**2))
        btnckh = 2.0 * np.arctan2(np.sqrt(xnkh), np.sqrt(1.0 - xnkh)) / math.pi
        btpdkh = 2.0 * np.sqrt(xnkh * (1.0 - xnkh)) / math.pi
        btnchk = 2.0 * np.arctan2(np.sqrt(xnhk), np.sqrt(1.0 - xnhk)) / math.pi
        btpdhk = 2.0 * np.sqrt(xnhk * (1.0 - xnhk)) / math.pi
        for j in range(1, nu // 2 + 1):
            bvt = bvt + gmph * (1.0 + ks * btnckh) + gmpk * (1.0 + hs * btnchk)
            btnckh = btnckh + btpdkh
            btpdkh = 2 * j * btpdkh * (1.0 - xnkh) / (2 * j + 1)
            btnchk = btnchk + btpdhk
            btpdhk = 2 * j * btpdhk * (1.0 - xnhk) / (2 * j + 1)
            gmph = gmph * (2 * j - 1) / (2 * j * (1.0 + dh**2 / nu))
            gmpk = gmpk * (2 * j - 1) / (2 * j * (1.0 + dk**2 / nu))
    else:
        sq = math.sqrt(nu)
        qhrk = np.sqrt(dh**2 + dk**2 - 2.0 * r * dh * dk + nu * ors)
        hkrn = dh * dk + r * nu
        hkn = dh * dk - nu
        hpk = dh + dk
        bvt = np.arctan2(-sq * (hkn * qhrk + hpk * hkrn), hkn * hkrn - nu * hpk * qhrk) / tpi
        bvt = np.where(bvt < -1e-15, bvt + 1.0, bvt)
        gmph = dh / (tpi * sq * (1.0 + dh**2 / nu))
        gmpk = dk / (tpi * sq * (1.0 + dk**2 / nu))
        btnckh = np.sqrt(xnkh)
        btpdkh = btnckh.copy()
        btnchk = np.sqrt(xnhk)
        btpdhk = btnchk.copy()
        for j in range(1, (nu - 1) // 2 + 1):
            bvt = bvt + gmph * (1.0 + ks * btnckh) + gmpk * (1.0 + hs * btnchk)
            btpdkh = (2 * j - 1) * btpdkh * (1.0 - xnkh) / (2 * j)
            btnckh = btnckh + btpdkh
            btpdhk = (2 * j - 1) * btpdhk * (1.0 - xnhk) / (2 * j)
            btnchk = btnchk + btpdhk
            gmph = gmph * 2 * j / ((2 * j + 1) * (1.0 + dh**2 / nu))
            gmpk = gmpk * 2 * j / ((2 * j + 1) * (1.0 + dk**2 / nu))
    return bvt


def bvt_cdf(h, k, rho, nu):
    """Standard bivariate t CDF with ``nu`` degrees of freedom.

    Integer ``nu`` uses the exact Dunnett-Sobel series; other values fall back
    to the conditioning quadrature.  ``nu = inf`` dispatches to :func:`bvn_cdf`.
    """
    if _is_normal(nu):
        return bvn_cdf(h, k, rho)
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    shape = h.shape
    h = h.ravel()
    k = k.ravel()
    rho = float(np.clip(rho, -1.0, 1.0))
    out = np.empty(h.shape)
    lo = (h == -np.inf) | (k == -np.inf)
    hinf = (h == np.inf) & ~lo
    kinf = (k == np.inf) & ~lo & ~hinf
    fin = ~(lo | hinf | kinf)
    out[lo] = 0.0
    out[hinf] = special.stdtr(nu, k[hinf])
    out[kinf] = special.stdtr(nu, h[kinf])
    if fin.any():
        hf, kf = h[fin], k[fin]
        if rho >= RHO_CLAMP:
            val = special.stdtr(nu, np.minimum(hf, kf))
        elif rho <= -RHO_CLAMP:
            val = np.maximum(special.stdtr(nu, hf) - special.stdtr(nu, -kf), 0.0)
        elif float(nu).is_integer() and 1 <= nu <= 400:
            val = _bvtl_integer(int(nu), hf, kf, rho)
        else:
            corr = np.array([[1.0, rho], [rho, 1.0]])
            val = _reduce(np.column_stack([hf, kf]), corr, nu)
        out[fin] = val
    return np.clip(out, 0.0, 1.0).reshape(shape)


# ---------------------------------------------------------------------------
# conditioning reduction
# ---------------------------------------------------------------------------


def conditional_law(corr, j):
    """Conditional structure of the remaining coordinates given coordinate ``j``.

    Returns ``(others, beta, disp)`` with ``beta = corr[others, j]`` and
    ``disp = corr[others][:, others] - beta beta^T``, the dispersion matrix of
    the conditional law (before the t-specific radial rescaling).
    """
    d = corr.shape[0]
    others = [i for i in range(d) if i != j]
    beta = corr[others, j]
    disp = corr[np.ix_(others, others)] - np.outer(beta, beta)
    return others, beta, disp


def conditional_upper(h_j, h_rest, beta, disp, nu):
    """Standardized upper limits and correlation of the conditional law.

    ``h_j`` has shape (m,), ``h_rest`` shape (m, d-1).  For the t law the
    conditional distribution is t with ``nu + 1`` degrees of freedom after
    scaling by sqrt((nu + 1) / (nu + h_j^2)).
    """
    sd = np.sqrt(np.clip(np.diag(disp), 1e-300, None))
    z = (h_rest - h_j[:, None] * beta[None, :]) / sd[None, :]
    if not _is_normal(nu):
        z = z * np.sqrt((nu + 1.0) / (nu + h_j * h_j))[:, None]
    ccorr = disp / np.outer(sd, sd)
    np.fill_diagonal(ccorr, 1.0)
    return z, ccorr


def _reduce(h, corr, nu, nodes=OUTER_NODES):
    """Reduce a d-dimensional probability to quadrature over one coordinate.

    P(X <= h) = integral over s < h_j of f(s) P(X_-j <= h_-j | X_j = s) ds.
    The integral is taken in the probability scale u = F(s) with the graded
    substitution u = F(h_j) v^3, which removes the algebraic endpoint
    behaviour at u -> 0 so that Gauss-Legendre converges quickly in v.
    The conditioning coordinate is the one least correlated with the others.
    """
    m, d = h.shape
    strength = np.max(np.abs(corr - np.eye(d)), axis=0)
    j = int(np.flatnonzero(strength <= strength.min() + 0.05)[0])
    others, beta, disp = conditional_law(corr, j)
    sub_nu = nu if _is_normal(nu) else nu + 1.0
    x, w = _gauss_legendre(nodes)
    v = (x + 1.0) / 2.0
    weights = w / 2.0 * GRADE * v ** (GRADE - 1)
    top = t_cdf(h[:, j], nu)
    s = t_ppf(top[:, None] * v[None, :] ** GRADE, nu)
    h_rest = np.repeat(h[:, others], nodes, axis=0)
    z, ccorr = conditional_upper(s.ravel(), h_rest, beta, disp, nu)
    inner = _std_cdf(z, ccorr, sub_nu).reshape(m, nodes)
    return top * (inner @ weights)


def _std_cdf(h, corr, nu):
    """Dispatch on dimension for finite-or-infinite limits, shape (m, d)."""
    d = h.shape[1]
    if d == 1:
        return t_cdf(h[:, 0], nu)
    if d == 2:
        return bvt_cdf(h[:, 0], h[:, 1], corr[0, 1], nu)
    return _trivariate(h, corr, nu)


def _trivariate(h, corr, nu):
    m = h.shape[0]
    out = np.zeros(m)
    lo = np.any(h == -np.inf, axis=1)
    todo = ~lo
    # drop coordinates at +inf by marginalizing
    for pattern in {tuple(row) for row in (h[todo] == np.inf)}:
        pat = np.array(pattern)
        rows = todo & np.all((h == np.inf) == pat, axis=1)
        keep = [i for i in range(3) if not pat[i]]
        if not keep:
            out[rows] = 1.0
        elif len(keep) < 3:
            out[rows] = _std_cdf(h[rows][:, keep], corr[np.ix_(keep, keep)], nu)
        else:
            out[rows] = _reduce(h[rows], corr, nu)
    return np.clip(out, 0.0, 1.0)


def _as_limits(upper, d):
    upper = np.asarray(upper, dtype=float)
    single = upper.ndim == 1
    h = upper.reshape(-1, d)
    return h, single


def tvn_cdf(upper, corr):
    """Standard trivariate normal CDF for limit vectors of shape (3,) or (m, 3)."""
    corr = np.asarray(corr, dtype=float)
    h, single = _as_limits(upper, 3)
    val = _trivariate(h, corr, math.inf)
    return val[0] if single else val


def mvt_cdf(upper, corr, nu=math.inf):
    """Standard multivariate t CDF (d <= 3); ``nu = inf`` gives the normal CDF.

    Parameters
    ----------
    upper : array_like, shape (d,) or (m, d)
        Upper integration limits; infinities are allowed.
    corr : array_like, shape (d, d)
        Correlation matrix.
    nu : float
        Degrees of freedom.
    """
    corr = np.atleast_2d(np.asarray(corr, dtype=float))
    d = corr.shape[0]
    if d > 3:
        raise ValueError("dimension above 3 is not supported")
    h, single = _as_limits(upper, d)
    val = _std_cdf(h, corr, nu)
    return val[0] if single else val


def mvn_cdf(upper, corr):
    return mvt_cdf(upper, corr, math.inf)
