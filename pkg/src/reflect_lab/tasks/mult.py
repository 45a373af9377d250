"""Long multiplication as a step-wise reasoning task.

A state is (x, y, z) standing for the value x*y + z.  One step picks a digit
value u present in y, zeroes every occurrence of u in y, and adds the matching
contributions u*x*10^i to the running sum z.  The state is terminal when x or
y is zero; the answer is then z.  An honestly computed step preserves x*y + z,
which is what the rule-based binary verifier checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mtp import Step, Verification


@dataclass(frozen=True)
class MultState:
    x: int
    y: int
    z: int

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                raise ValueError(f"{name} must be a nonnegative int")

    @property
    def terminal(self) -> bool:
        return self.x == 0 or self.y == 0

    def value(self) -> int:
        return self.x * self.y + self.z


@dataclass(frozen=True)
class MultMove:
    """Eliminate digit value `digit` from one operand at `positions`
    (units place = 0).

    side names the operand being reduced; delta is digit times the other
    operand; contributions[i] is the amount added to z for positions[i];
    new_state is the full claimed result, applied as written.  The expert
    always reduces y (a fixed order keeps it deterministic), but moves on
    either side verify identically.
    """

    side: str
    digit: int
    positions: tuple[int, ...]
    delta: int
    contributions: tuple[int, ...]
    new_state: MultState


def digit_at(value: int, position: int) -> int:
    return (value // 10**position) % 10


def nonzero_digits(value: int) -> dict[int, list[int]]:
    """Map digit value -> positions where it occurs, low position first."""
    out: dict[int, list[int]] = {}
    pos = 0
    while value:
        d = value % 10
        if d:
            out.setdefault(d, []).append(pos)
        value //= 10
        pos += 1
    return out


def make_move(state: MultState, digit: int, side: str = "y") -> MultMove:
    """Honest elimination of every occurrence of `digit` in the named
    operand."""
    if state.terminal:
        raise ValueError("state is terminal; no elimination move exists")
    if side not in ("x", "y"):
        raise ValueError("side must be 'x' or 'y'")
    operand = state.y if side == "y" else state.x
    other = state.x if side == "y" else state.y
    occurrences = nonzero_digits(operand).get(digit)
    if not occurrences:
        raise ValueError(f"digit {digit} does not occur in {side} = {operand}")
    positions = tuple(occurrences)
    delta = digit * other
    contributions = tuple(delta * 10**p for p in positions)
    reduced = operand - digit * sum(10**p for p in positions)
    if side == "y":
        new_state = MultState(state.x, reduced, state.z + sum(contributions))
    else:
        new_state = MultState(reduced, state.y, state.z + sum(contributions))
    return MultMove(side, digit, positions, delta, contributions, new_state)


def mult_expert_step(state: MultState, rng: np.random.Generator | None = None) -> Step:
    """Deterministic expert: eliminate the smallest digit value left in y,
    or emit the answer once the state is terminal."""
    if state.terminal:
        return Step(content=state.z, is_answer=True)
    smallest = min(nonzero_digits(state.y))
    return Step(content=make_move(state, smallest))


class MultExpertPolicy:
    def sample(self, state: MultState, rng: np.random.Generator) -> Step:
        return mult_expert_step(state, rng)


class MultTransition:
    """Applies a move exactly as written; arithmetic errors are the
    verifier's problem, not the transition's."""

    def apply(self, state: MultState, step: Step) -> MultState:
        if step.is_answer:
            return state
        move = step.content
        if not isinstance(move, MultMove):
            raise ValueError("mult transition got a non-move step")
        return move.new_state


def verify_binary_mult(state: MultState, step: Step) -> Verification:
    """Single label: does the step preserve the running value x*y + z?

    Answer steps are positive iff proposed at a terminal state with the
    correct accumulated value.
    """
    if step.is_answer:
        return Verification((state.terminal and step.content == state.z,))
    move = step.content
    if not isinstance(move, MultMove):
        return Verification((False,))
    return Verification((move.new_state.value() == state.value(),))


def verify_detailed_mult(state: MultState, step: Step) -> Verification:
    """One label per elemental computation, in frozen order: the unit
    product delta = digit * other-operand, then each positional contribution
    (in the move's stated position order, low first for honest moves), then
    the running-sum update."""
    if step.is_answer:
        return verify_binary_mult(state, step)
    move = step.content
    if (
        not isinstance(move, MultMove)
        or move.side not in ("x", "y")
        or not move.positions
        or len(move.positions) != len(move.contributions)
    ):
        return Verification((False,))
    operand = state.y if move.side == "y" else state.x
    other = state.x if move.side == "y" else state.y
    new_operand = move.new_state.y if move.side == "y" else move.new_state.x
    labels = [move.delta == move.digit * other]
    for pos, contribution in zip(move.positions, move.contributions):
        ok = (
            digit_at(operand, pos) == move.digit
            and digit_at(new_operand, pos) == 0
            and contribution == move.delta * 10**pos
        )
        labels.append(ok)
    labels.append(move.new_state.z == state.z + sum(move.contributions))
    return Verification(tuple(labels))


def perturb_contribution(
    state: MultState, move: MultMove, rng: np.random.Generator
) -> tuple[MultMove, int]:
    """Corrupt one decimal digit of one contribution, propagating the wrong
    value into the claimed running sum (the corrupted reasoner believes its
    own arithmetic).  Returns the move and the detailed-label index of the
    corrupted element."""
    ci = int(rng.integers(len(move.contributions)))
    value = move.contributions[ci]
    n_digits = len(str(value))
    dpos = int(rng.integers(n_digits))
    old_digit = digit_at(value, dpos)
    choices = [d for d in range(10) if d != old_digit]
    new_digit = int(choices[int(rng.integers(9))])
    corrupted = value + (new_digit - old_digit) * 10**dpos
    contributions = tuple(
        corrupted if i == ci else c for i, c in enumerate(move.contributions)
    )
    new_state = MultState(
        move.new_state.x, move.new_state.y, state.z + sum(contributions)
    )
    corrupted_move = MultMove(
        move.side, move.digit, move.positions, move.delta, contributions, new_state
    )
    return (corrupted_move, 1 + ci)
