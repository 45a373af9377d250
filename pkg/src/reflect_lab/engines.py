"""Reflective executors: retry-in-place search and width-limited backtracking.

Both engines drive a self-verifying policy.  Proposals are verified while the
reflective budget lasts; once it is spent the run reverts to non-reflective
behavior (every later proposal is accepted unverified).  The backtracking
engine additionally limits each non-root state to `rtbs_width` proposal
attempts and walks back up the accepted chain when a state exhausts them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .mtp import (
    Disposition,
    EpisodeRecord,
    Event,
    Outcome,
    Query,
    SelfVerifying,
    Step,
    TransitionInterface,
    Verification,
    VerifiedStep,
    task_hooks,
)


@dataclass(frozen=True)
class ReflectConfig:
    """Budgets and width for the reflective executors.

    reflective_budget counts verified proposals; after that many the run
    stops verifying.  total_budget counts proposals of any kind.  rtbs_width
    is the per-state attempt cap of the backtracking engine.  root_unlimited
    keeps the root query exempt from the attempt cap (the deployed behavior);
    the synthetic validator turns it off to match the closed-form recursion,
    which charges the root exactly rtbs_width attempts like any other state.
    """

    reflective_budget: int = 64
    total_budget: int = 96
    rtbs_width: int = 4
    root_unlimited: bool = True

    def __post_init__(self) -> None:
        if self.reflective_budget < 0:
            raise ValueError("reflective_budget must be >= 0")
        if self.total_budget < 1:
            raise ValueError("total_budget must be >= 1")
        if self.rtbs_width < 1:
            raise ValueError("rtbs_width must be >= 1")


@dataclass
class TraceStack:
    """Stack of (parent state, attempts used there, the step taken from it).

    One frame per accepted link of the current chain, oldest first.  Popping
    a frame restores the parent state together with its attempt counter.
    """

    frames: list[tuple[Any, int, Step]] = field(default_factory=list)

    def push(self, state: Any, attempts: int, step: Step) -> None:
        self.frames.append((state, attempts, step))

    def pop(self) -> tuple[Any, int, Step]:
        return self.frames.pop()

    def __len__(self) -> int:
        return len(self.frames)

    def __bool__(self) -> bool:
        return bool(self.frames)


def _finish(
    query: Query,
    events: list[Event],
    answer: Optional[Step],
    budget_hit: bool,
) -> EpisodeRecord:
    hooks = task_hooks(query.task)
    if answer is not None:
        outcome = Outcome.CORRECT if hooks.check_answer(query, answer) else Outcome.INCORRECT
    elif budget_hit:
        outcome = Outcome.BUDGET_EXHAUSTED
    else:
        outcome = Outcome.INCORRECT
    return EpisodeRecord(query, tuple(events), answer, len(events), outcome)


def run_rmtp(
    self_verifying: SelfVerifying,
    transition: TransitionInterface,
    query: Query,
    config: ReflectConfig,
    rng: np.random.Generator,
) -> EpisodeRecord:
    """Reflective chain with unlimited retries at the current state.

    Rejected proposals leave the state unchanged and are retried; there is no
    backtracking.  Terminates on an accepted answer step or on the total
    budget.
    """
    hooks = task_hooks(query.task)
    hooks.validate(query)
    state = hooks.initial_state(query)
    events: list[Event] = []
    verified_used = 0
    answer: Optional[Step] = None
    while len(events) < config.total_budget:
        step = self_verifying.sample(state, rng)
        if verified_used < config.reflective_budget:
            verification = self_verifying.verify(state, step, rng)
            verified_used += 1
        else:
            verification = Verification()
        vstep = VerifiedStep(step, verification)
        if verification.rejected:
            events.append(Event(state, vstep, Disposition.REJECTED))
            continue
        events.append(Event(state, vstep, Disposition.ACCEPTED))
        if step.is_answer:
            answer = step
            break
        state = transition.apply(state, step)
    return _finish(query, events, answer, answer is None and len(events) >= config.total_budget)


def run_rtbs(
    self_verifying: SelfVerifying,
    transition: TransitionInterface,
    query: Query,
    config: ReflectConfig,
    rng: np.random.Generator,
) -> EpisodeRecord:
    """Backtracking search with a per-state attempt cap.

    Each accepted step pushes (parent state, attempt counter, step) and
    resets the counter.  When a non-root state collects `rtbs_width` rejected
    attempts the rejection propagates upward: frames are popped, one
    TRACEBACK event per popped level, until an ancestor with spare attempts
    is restored.  The popped frame's accepted step counts as the attempt that
    failed, so no non-root state ever sees more than `rtbs_width` proposals.
    Root attempts are unlimited while the budget lasts unless
    `config.root_unlimited` is off, in which case an exhausted root ends the
    episode with no answer.

    Only proposals are charged against total_budget; traceback events are
    bookkeeping.  After the reflective budget is spent, proposals are no
    longer verified and the run descends non-reflectively.
    """
    hooks = task_hooks(query.task)
    hooks.validate(query)
    state = hooks.initial_state(query)
    stack = TraceStack()
    events: list[Event] = []
    attempts = 0
    verified_used = 0
    proposals = 0
    answer: Optional[Step] = None
    root_exhausted = False
    while proposals < config.total_budget:
        step = self_verifying.sample(state, rng)
        proposals += 1
        attempts += 1
        if verified_used < config.reflective_budget:
            verification = self_verifying.verify(state, step, rng)
            verified_used += 1
        else:
            verification = Verification()
        vstep = VerifiedStep(step, verification)
        if not verification.rejected:
            events.append(Event(state, vstep, Disposition.ACCEPTED))
            if step.is_answer:
                answer = step
                break
            stack.push(state, attempts, step)
            state = transition.apply(state, step)
            attempts = 0
            continue
        events.append(Event(state, vstep, Disposition.REJECTED))
        if not stack:
            # At the root.  With unlimited root attempts just retry; with a
            # capped root the episode dies once the cap is reached.
            if not config.root_unlimited and attempts >= config.rtbs_width:
                root_exhausted = True
                break
            continue
        if attempts < config.rtbs_width:
            continue
        while stack:
            parent, parent_attempts, parent_step = stack.pop()
            events.append(
                Event(parent, VerifiedStep(parent_step), Disposition.TRACEBACK)
            )
            state, attempts = parent, parent_attempts
            if attempts < config.rtbs_width:
                break
            if not stack:
                # Popped back to the root with its attempts spent.
                if not config.root_unlimited:
                    root_exhausted = True
                break
        if root_exhausted:
            break
    budget_hit = answer is None and not root_exhausted and proposals >= config.total_budget
    return _finish(query, events, answer, budget_hit)
