"""Pluripotential theory on almost complex surfaces, discretized on 4D grids."""

from .errors import (ConvergenceError, DomainError, FieldIOError, HypothesisError,
                     LabError, StructureError)
from .grid import (NEG_INF, FormField, GridDomain, MeasureField, ScalarField, ball_rho,
                   box, build_domain, integrate, load_field, norm, save_field)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DomainError", "FieldIOError", "HypothesisError", "LabError",
    "StructureError", "NEG_INF", "FormField", "GridDomain", "MeasureField", "ScalarField",
    "ball_rho", "box", "build_domain", "integrate", "load_field", "norm", "save_field",
]
