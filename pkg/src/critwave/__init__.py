"""Radial numerics for the semilinear wave equation with scale-invariant
damping V0/|x| outside the unit ball."""

__version__ = "0.1.0"

from .domain import ModelParams, Nonlinearity, RadialField, RadialGrid  # noqa: E402
from .solvers import NumericalFailure, Outcome, OutcomeKind, SolverConfig  # noqa: E402

__all__ = [
    "ModelParams", "Nonlinearity", "RadialField", "RadialGrid",
    "NumericalFailure", "Outcome", "OutcomeKind", "SolverConfig", "__version__",
]
