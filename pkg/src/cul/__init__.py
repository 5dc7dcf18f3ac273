"""Constrained two-objective descent for controllable unlearning."""

from cul.errors import (
    ConstraintViolation,
    CulError,
    DegenerateSeries,
    FormatError,
    InvalidArgument,
    NumericFailure,
    OutOfRange,
)
from cul.objective import BiObjectiveProblem, ObjectiveEval, get_problem, make_quadratic_pair
from cul.optimizer import ControlFunction, Phase, StepConfig, Trajectory, run, step
from cul.pareto import ParetoFront, filter_nondominated, solve_boundary_high, solve_boundary_low, sweep

__version__ = "0.1.0"

__all__ = [
    "BiObjectiveProblem",
    "ConstraintViolation",
    "ControlFunction",
    "CulError",
    "DegenerateSeries",
    "FormatError",
    "InvalidArgument",
    "NumericFailure",
    "ObjectiveEval",
    "OutOfRange",
    "ParetoFront",
    "Phase",
    "StepConfig",
    "Trajectory",
    "filter_nondominated",
    "get_problem",
    "make_quadratic_pair",
    "run",
    "solve_boundary_high",
    "solve_boundary_low",
    "step",
    "sweep",
]
