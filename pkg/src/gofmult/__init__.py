"""Multiplier and parametric-bootstrap goodness-of-fit tests for parametric families."""

__version__ = "0.1.0"

from .distributions import Family, Gamma, Logistic, MultivariateNormal, MultivariateT, Normal, StudentT, Weibull
from .errors import (
    DegenerateData,
    DomainError,
    GofError,
    NonConvergence,
    NumericalFailure,
    ReplicateFailure,
    SingularInformation,
)
from .estimation import FitConfig, FitResult, fit_mle
from .gof import GofResult, gof_test, multiplier_test, parametric_bootstrap_test
from .registry import get_family
from .sklar import CopulaSpec, SklarFamily

__all__ = [
    "CopulaSpec",
    "DegenerateData",
    "DomainError",
    "Family",
    "FitConfig",
    "FitResult",
    "Gamma",
    "GofError",
    "GofResult",
    "Logistic",
    "MultivariateNormal",
    "MultivariateT",
    "NonConvergence",
    "Normal",
    "NumericalFailure",
    "ReplicateFailure",
    "SingularInformation",
    "SklarFamily",
    "StudentT",
    "Weibull",
    "fit_mle",
    "get_family",
    "gof_test",
    "multiplier_test",
    "parametric_bootstrap_test",
]
