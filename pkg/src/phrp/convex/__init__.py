"""Solver for slack-minimization programs over log-domain variables."""

from .program import (
    Affine,
    ConstraintRecord,
    DomainViolationError,
    ExpTerm,
    LogConvexProgram,
    LogResidual,
    ProgramStructureError,
    affine,
    eval_constraint,
    gradient,
)
from .solver import SolveResult, solve

__all__ = [
    "Affine",
    "ConstraintRecord",
    "DomainViolationError",
    "ExpTerm",
    "LogConvexProgram",
    "LogResidual",
    "ProgramStructureError",
    "SolveResult",
    "affine",
    "eval_constraint",
    "gradient",
    "solve",
]
