"""Family identifiers used on the command line.

``norm``, ``t<nu>``, ``logis``, ``gamma``, ``weibull`` (univariate);
``mvnorm``, ``mvt<nu>`` (multivariate normal / t);
``nc``, ``gn``, ``t<nu>n`` (normal margins + Clayton copula, gamma margins +
normal copula, t margins + normal copula).
"""

from __future__ import annotations

import math
import re

from .distributions import Gamma, Logistic, MultivariateNormal, MultivariateT, Normal, StudentT, Weibull
from .sklar import CopulaSpec, SklarFamily

UNIVARIATE = {"norm": Normal, "logis": Logistic, "gamma": Gamma, "weibull": Weibull}

_T = re.compile(r"^t(\d+(?:\.\d+)?)$")
_MVT = re.compile(r"^mvt(\d+(?:\.\d+)?)$")
_TN = re.compile(r"^t(\d+(?:\.\d+)?)n$")


def get_family(identifier, dim=1):
    """Build the family named by ``identifier`` for data of dimension ``dim``."""
    key = identifier.strip().lower()
    if key in UNIVARIATE or _T.match(key):
        if dim != 1:
            raise ValueError(f"family {identifier!r} is univariate but the data have {dim} columns")
        if key in UNIVARIATE:
            return UNIVARIATE[key]()
        return StudentT(float(_T.match(key).group(1)))
    if dim not in (2, 3):
        raise ValueError(f"family {identifier!r} needs 2 or 3 columns, got {dim}")
    if key == "mvnorm":
        return MultivariateNormal(dim)
    if m := _MVT.match(key):
        return MultivariateT(dim, float(m.group(1)))
    if key == "nc":
        return SklarFamily(CopulaSpec("clayton", dim), [Normal() for _ in range(dim)], name="nc")
    if key == "gn":
        return SklarFamily(CopulaSpec("normal", dim), [Gamma() for _ in range(dim)], name="gn")
    if m := _TN.match(key):
        nu = float(m.group(1))
        return SklarFamily(CopulaSpec("normal", dim), [StudentT(nu) for _ in range(dim)], name=f"t{nu:g}n")
    raise ValueError(f"unknown family identifier {identifier!r}")


def is_multivariate_t(family):
    return isinstance(family, MultivariateT) and not math.isinf(family.nu)
