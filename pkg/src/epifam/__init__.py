"""Partial-likelihood analysis of imprinting and maternal effects from
case-control family genotype data, with a simulator, reference
estimators and a reproducible experiment harness."""

__version__ = "0.1.0"

from epifam.counts import CountsTable
from epifam.model import (
    FeasibilityError,
    MatingTypeDistribution,
    RiskParameters,
    penetrance,
    solve_phenocopy,
    transmission_prob,
)
from epifam.likelihood import (
    DegenerateDataError,
    FitResult,
    Hypothesis,
    TestResult,
    association,
    fit,
    imprinting,
    lrt,
    maternal,
    partial_loglik,
)

__all__ = [
    "__version__",
    "CountsTable",
    "FeasibilityError",
    "MatingTypeDistribution",
    "RiskParameters",
    "penetrance",
    "solve_phenocopy",
    "transmission_prob",
    "DegenerateDataError",
    "FitResult",
    "Hypothesis",
    "TestResult",
    "association",
    "fit",
    "imprinting",
    "lrt",
    "maternal",
    "partial_loglik",
]
