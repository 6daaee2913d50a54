"""Exact formulas, Tracy-Widom laws and Monte Carlo for the asymmetric simple exclusion process."""

from .errors import (
    ConvergenceError,
    DegenerateInputError,
    PoleError,
    PreconditionError,
    TruncationWarning,
)
from .rates import Finite, HoppingRates, Step, StepBernoulli

__all__ = [
    "ConvergenceError",
    "DegenerateInputError",
    "PoleError",
    "PreconditionError",
    "TruncationWarning",
    "Finite",
    "HoppingRates",
    "Step",
    "StepBernoulli",
]
