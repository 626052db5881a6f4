"""The quantitative Morse construction: constants, perturbation, charts, verification."""

from .chart import MorseChart, QuadratureError, hadamard_form, hadamard_forms, morse_chart
from .constants import ConstantsError, MorseConstants, compute_constants
from .perturb import (
    BumpSum,
    NoRegularValueError,
    Perturbation,
    PerturbationError,
    PerturbedField,
    RegularValue,
    build_perturbation,
    near_critical_values,
    select_regular_value,
)

__all__ = [
    "BumpSum",
    "ConstantsError",
    "MorseChart",
    "MorseConstants",
    "NoRegularValueError",
    "Perturbation",
    "PerturbationError",
    "PerturbedField",
    "QuadratureError",
    "RegularValue",
    "build_perturbation",
    "compute_constants",
    "hadamard_form",
    "hadamard_forms",
    "morse_chart",
    "near_critical_values",
    "select_regular_value",
]

from .pipeline import Analysis, AnalysisError, run_analysis
from .verify import ItemResult, VerificationReport, residual_tolerance, verify_theorem

__all__ += [
    "Analysis",
    "AnalysisError",
    "ItemResult",
    "VerificationReport",
    "residual_tolerance",
    "run_analysis",
    "verify_theorem",
]
