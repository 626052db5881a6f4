"""Expression parsing, jet arithmetic and derivative budgets."""

from .budget import DerivativeBudget, estimate_budget, tensor_norms
from .expr import FunctionSpec, ParseError, SpecError, load_spec, parse, spec_from_json
from .fields import (
    ComponentMap,
    DomainError,
    GradientMap,
    JetValue,
    LinearMap,
    VectorMap,
    gradients,
    gradients_and_hessians,
    jet,
)
from .grids import ball_grid, domain_samples, sphere_grid
from .jets import Jet, JetSpace, jet_space

__all__ = [
    "ComponentMap",
    "DerivativeBudget",
    "DomainError",
    "FunctionSpec",
    "GradientMap",
    "Jet",
    "JetSpace",
    "JetValue",
    "LinearMap",
    "ParseError",
    "SpecError",
    "VectorMap",
    "ball_grid",
    "domain_samples",
    "estimate_budget",
    "gradients",
    "gradients_and_hessians",
    "jet",
    "jet_space",
    "load_spec",
    "parse",
    "spec_from_json",
    "sphere_grid",
    "tensor_norms",
]
