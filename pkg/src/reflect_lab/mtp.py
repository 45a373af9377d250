"""Core vocabulary for step-wise reasoning episodes.

A reasoning process is a chain of states.  A policy proposes the next step
from the current state, a deterministic transition applies it, and the chain
ends when a step is flagged as the final answer.  A verifier may attach a
list of binary labels to each proposed step; any negative label rejects the
step and leaves the state unchanged.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any, Callable, Optional, Protocol, runtime_checkable

import numpy as np


class TaskName(str, enum.Enum):
    SYNTHETIC = "synthetic"
    MULT = "mult"
    SUDOKU = "sudoku"


class DifficultyTier(str, enum.Enum):
    """Query difficulty buckets; the hardest bucket is held out of training."""

    ID_EASY = "id_easy"
    ID_HARD = "id_hard"
    OOD_HARD = "ood_hard"


@dataclass(frozen=True)
class Query:
    """A problem instance.  The payload shape is task-specific."""

    task: TaskName
    payload: Any
    tier: Optional[DifficultyTier] = None


@dataclass(frozen=True)
class Step:
    """One proposed reasoning step.  `is_answer` marks a terminal step."""

    content: Any
    is_answer: bool = False


@dataclass(frozen=True)
class Verification:
    """Ordered binary labels for one step; True is positive, False negative.

    An empty tuple means the step was not verified at all (non-reflective).
    """

    labels: tuple[bool, ...] = ()

    @property
    def rejected(self) -> bool:
        return any(not ok for ok in self.labels)


@dataclass(frozen=True)
class VerifiedStep:
    step: Step
    verification: Verification = Verification()


class Disposition(str, enum.Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    TRACEBACK = "traceback"


@dataclass(frozen=True)
class Event:
    """One entry of an episode log: the state seen, the step, the outcome.

    For TRACEBACK events the step is the previously accepted step that is
    being recursively rejected, and the state is the ancestor being restored.
    """

    state: Any
    verified: VerifiedStep
    disposition: Disposition


class Outcome(str, enum.Enum):
    CORRECT = "correct"
    INCORRECT = "incorrect"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class EpisodeRecord:
    query: Query
    events: tuple[Event, ...]
    answer: Optional[Step]
    steps_used: int
    outcome: Outcome

    def __post_init__(self) -> None:
        if self.steps_used != len(self.events):
            raise ValueError("steps_used must equal the number of events")


@runtime_checkable
class PolicyInterface(Protocol):
    def sample(self, state: Any, rng: np.random.Generator) -> Step: ...


@runtime_checkable
class VerifierInterface(Protocol):
    def verify(
        self, state: Any, step: Step, rng: np.random.Generator
    ) -> Verification: ...


@runtime_checkable
class TransitionInterface(Protocol):
    def apply(self, state: Any, step: Step) -> Any: ...


@dataclass(frozen=True)
class SelfVerifying:
    """A policy bundled with its verifier (a self-verifying policy)."""

    policy: PolicyInterface
    verifier: VerifierInterface

    def sample(self, state: Any, rng: np.random.Generator) -> Step:
        return self.policy.sample(state, rng)

    def verify(
        self, state: Any, step: Step, rng: np.random.Generator
    ) -> Verification:
        return self.verifier.verify(state, step, rng)


@dataclass(frozen=True)
class TaskHooks:
    """Task-level services the runners need but the core cannot define.

    initial_state builds the root state from a query, check_answer is the
    final-answer oracle, and validate raises ValueError on malformed
    payloads.  Tasks register their hooks at import time.
    """

    initial_state: Callable[[Query], Any]
    check_answer: Callable[[Query, Step], bool]
    validate: Callable[[Query], None]


_TASK_HOOKS: dict[TaskName, TaskHooks] = {}


def register_task(task: TaskName, hooks: TaskHooks) -> None:
    _TASK_HOOKS[task] = hooks


def task_hooks(task: TaskName) -> TaskHooks:
    try:
        return _TASK_HOOKS[task]
    except KeyError:
        raise KeyError(f"no hooks registered for task {task!r}") from None


def is_rejected(verification: Verification) -> bool:
    """A step is rejected iff at least one negative label is present."""
    return verification.rejected


def run_nonreflective(
    policy: PolicyInterface,
    transition: TransitionInterface,
    query: Query,
    budget: int,
    rng: np.random.Generator,
) -> EpisodeRecord:
    """Run a plain (unverified) chain until an answer or the step budget.

    Every proposed step is accepted and applied; verification lists stay
    empty.  The outcome is CORRECT iff an answer was produced and the task's
    answer oracle accepts it.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    hooks = task_hooks(query.task)
    hooks.validate(query)
    state = hooks.initial_state(query)
    events: list[Event] = []
    answer: Optional[Step] = None
    while len(events) < budget:
        step = policy.sample(state, rng)
        events.append(Event(state, VerifiedStep(step), Disposition.ACCEPTED))
        if step.is_answer:
            answer = step
            break
        state = transition.apply(state, step)
    if answer is None:
        outcome = Outcome.BUDGET_EXHAUSTED
    elif hooks.check_answer(query, answer):
        outcome = Outcome.CORRECT
    else:
        outcome = Outcome.INCORRECT
    return EpisodeRecord(query, tuple(events), answer, len(events), outcome)


def reflective_transition(
    state: Any,
    verified: VerifiedStep,
    transition: TransitionInterface,
) -> Any:
    """Apply a verified step: rejected steps leave the state unchanged."""
    if verified.verification.rejected:
        return state
    return transition.apply(state, verified.step)
