"""Reflective step-wise reasoning lab.

Executors that verify and retry or backtrack over reasoning steps, the
closed-form accuracy theory of the synthetic rate model, Monte-Carlo
validation, two rule-checkable tasks (long multiplication and Sudoku),
corpus generation, and group-relative advantage utilities.
"""

from . import sim as _sim  # noqa: F401  (registers the synthetic task)
from . import tasks as _tasks  # noqa: F401  (registers mult and sudoku)
from .engines import ReflectConfig, run_rmtp, run_rtbs
from .mtp import (
    DifficultyTier,
    Disposition,
    EpisodeRecord,
    Event,
    Outcome,
    Query,
    SelfVerifying,
    Step,
    TaskName,
    Verification,
    VerifiedStep,
    run_nonreflective,
)
from .theory import SimplifiedParams, derived_rates

__version__ = "0.1.0"

__all__ = [
    "DifficultyTier",
    "Disposition",
    "EpisodeRecord",
    "Event",
    "Outcome",
    "Query",
    "ReflectConfig",
    "SelfVerifying",
    "SimplifiedParams",
    "Step",
    "TaskName",
    "Verification",
    "VerifiedStep",
    "derived_rates",
    "run_nonreflective",
    "run_rmtp",
    "run_rtbs",
    "__version__",
]
