"""Sudoku as a step-wise reasoning task.

States are 9x9 boards with 0 for blanks.  The expert step fills every blank
whose candidate set is a singleton, recomputing candidates after each fill;
when no singleton exists it guesses once, uniformly, at a blank with the
fewest candidates.  A blank with an empty candidate set means the branch is
unsolvable and raises DeadEndError.

The rule-based verifiers check only Sudoku legality (no given modified, no
duplicate in a row, column, or block).  Solvability questions go through an
independent most-constrained-first backtracking solver kept free of the
expert-policy code path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from ..mtp import Step, Verification

_ALL_MASK = 0b1111111110  # candidate bits for values 1..9


class DeadEndError(Exception):
    """A blank ended up with no legal candidate: the branch cannot close."""

    def __init__(self, row: int, col: int):
        super().__init__(f"blank at ({row}, {col}) has no candidates")
        self.row = row
        self.col = col


@dataclass(frozen=True)
class SudokuBoard:
    """Row-major cells, 81 ints in 0..9 (0 = blank)."""

    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.cells) != 81:
            raise ValueError("a board needs exactly 81 cells")
        if any(not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= 9 for v in self.cells):
            raise ValueError("cell values must be ints in 0..9")

    def get(self, row: int, col: int) -> int:
        return self.cells[row * 9 + col]

    def with_fills(self, fills: tuple[tuple[int, int, int], ...]) -> "SudokuBoard":
        cells = list(self.cells)
        for row, col, value in fills:
            cells[row * 9 + col] = value
        return SudokuBoard(tuple(cells))

    @property
    def full(self) -> bool:
        return 0 not in self.cells

    @property
    def blank_count(self) -> int:
        return self.cells.count(0)

    def render(self) -> str:
        return "\n".join(
            "".join(str(v) for v in self.cells[r * 9 : r * 9 + 9]) for r in range(9)
        )

    @staticmethod
    def parse(text: str) -> "SudokuBoard":
        rows = [line.strip() for line in text.strip().splitlines() if line.strip()]
        if len(rows) != 9 or any(len(r) != 9 for r in rows):
            raise ValueError("expected 9 lines of 9 digits")
        return SudokuBoard(tuple(int(ch) for row in rows for ch in row))


@dataclass(frozen=True)
class SudokuMove:
    """Fill the listed blanks; `guess` marks a non-forced fill."""

    fills: tuple[tuple[int, int, int], ...]
    guess: bool
    new_board: SudokuBoard


def _box(row: int, col: int) -> int:
    return (row // 3) * 3 + col // 3


def _masks(cells: tuple[int, ...] | list[int]) -> Optional[tuple[list[int], list[int], list[int]]]:
    """Used-value bitmasks per row/col/box, or None when a unit holds a
    duplicate."""
    rows = [0] * 9
    cols = [0] * 9
    boxes = [0] * 9
    for idx, value in enumerate(cells):
        if value == 0:
            continue
        r, c = divmod(idx, 9)
        b = _box(r, c)
        bit = 1 << value
        if (rows[r] | cols[c] | boxes[b]) & bit:
            return None
        rows[r] |= bit
        cols[c] |= bit
        boxes[b] |= bit
    return rows, cols, boxes


def consistent(board: SudokuBoard) -> bool:
    """No duplicated value in any row, column, or block."""
    return _masks(board.cells) is not None


def _candidate_values(mask: int) -> list[int]:
    return [v for v in range(1, 10) if mask & (1 << v)]


def solve(
    board: SudokuBoard, rng: Optional[np.random.Generator] = None
) -> Optional[SudokuBoard]:
    """Complete the board by most-constrained-first depth-first search.

    Returns any one completion, or None when the board is inconsistent or
    unsolvable.  With an rng, candidate values are tried in random order
    (used for board generation); otherwise ascending.
    """
    units = _masks(board.cells)
    if units is None:
        return None
    rows, cols, boxes = units
    cells = list(board.cells)
    blanks = [idx for idx, v in enumerate(cells) if v == 0]

    def search() -> bool:
        best_idx = -1
        best_mask = 0
        best_count = 10
        for idx in blanks:
            if cells[idx]:
                continue
            r, c = divmod(idx, 9)
            mask = _ALL_MASK & ~(rows[r] | cols[c] | boxes[_box(r, c)])
            count = mask.bit_count()
            if count == 0:
                return False
            if count < best_count:
                best_idx, best_mask, best_count = idx, mask, count
                if count == 1:
                    break
        if best_idx < 0:
            return True
        r, c = divmod(best_idx, 9)
        b = _box(r, c)
        values = _candidate_values(best_mask)
        if rng is not None:
            values = [values[i] for i in rng.permutation(len(values))]
        for v in values:
            bit = 1 << v
            cells[best_idx] = v
            rows[r] |= bit
            cols[c] |= bit
            boxes[b] |= bit
            if search():
                return True
            cells[best_idx] = 0
            rows[r] &= ~bit
            cols[c] &= ~bit
            boxes[b] &= ~bit
        return False

    if not search():
        return None
    return SudokuBoard(tuple(cells))


@lru_cache(maxsize=1 << 16)
def _solvable_cached(cells: tuple[int, ...]) -> bool:
    return solve(SudokuBoard(cells)) is not None


def solvable(board: SudokuBoard) -> bool:
    return _solvable_cached(board.cells)


def generate_full_board(rng: np.random.Generator) -> SudokuBoard:
    """A uniform-ish random completed board via randomized backtracking."""
    empty = SudokuBoard((0,) * 81)
    result = solve(empty, rng=rng)
    assert result is not None
    return result


def make_puzzle(full: SudokuBoard, blanks: int, rng: np.random.Generator) -> SudokuBoard:
    """Blank out `blanks` uniformly chosen cells of a completed board."""
    if not 0 <= blanks <= 81:
        raise ValueError("blanks must be in 0..81")
    positions = rng.choice(81, size=blanks, replace=False)
    cells = list(full.cells)
    for idx in positions:
        cells[int(idx)] = 0
    return SudokuBoard(tuple(cells))


def sudoku_expert_step(board: SudokuBoard, rng: np.random.Generator) -> Step:
    """Fill all forced blanks, else guess once at a most-constrained blank.

    Raises DeadEndError when some blank has no candidate left.
    """
    if board.full:
        return Step(content=board, is_answer=True)
    units = _masks(board.cells)
    if units is None:
        # The board itself is illegal; candidates are meaningless.  Treat the
        # first blank as dead so callers handle it like any stuck branch.
        idx = board.cells.index(0)
        raise DeadEndError(*divmod(idx, 9))
    rows, cols, boxes = units
    cells = list(board.cells)
    fills: list[tuple[int, int, int]] = []
    while True:
        filled_one = False
        for idx in range(81):
            if cells[idx]:
                continue
            r, c = divmod(idx, 9)
            b = _box(r, c)
            mask = _ALL_MASK & ~(rows[r] | cols[c] | boxes[b])
            if mask == 0:
                raise DeadEndError(r, c)
            if mask.bit_count() == 1:
                v = mask.bit_length() - 1
                cells[idx] = v
                rows[r] |= 1 << v
                cols[c] |= 1 << v
                boxes[b] |= 1 << v
                fills.append((r, c, v))
                filled_one = True
        if not filled_one:
            break
    if fills:
        return Step(content=SudokuMove(tuple(fills), False, SudokuBoard(tuple(cells))))
    # No forced cell anywhere: guess at one of the most constrained blanks.
    counts: dict[int, int] = {}
    for idx in range(81):
        if cells[idx]:
            continue
        r, c = divmod(idx, 9)
        mask = _ALL_MASK & ~(rows[r] | cols[c] | boxes[_box(r, c)])
        counts[idx] = mask.bit_count()
    fewest = min(counts.values())
    ties = sorted(idx for idx, n in counts.items() if n == fewest)
    pick = ties[int(rng.integers(len(ties)))]
    r, c = divmod(pick, 9)
    mask = _ALL_MASK & ~(rows[r] | cols[c] | boxes[_box(r, c)])
    values = _candidate_values(mask)
    v = values[int(rng.integers(len(values)))]
    fill = (r, c, v)
    return Step(
        content=SudokuMove((fill,), True, board.with_fills((fill,)))
    )


class SudokuExpertPolicy:
    """Expert policy; a dead-ended branch yields a deliberately illegal fill
    so that a verifier (or backtracking) can reject the branch."""

    def sample(self, state: SudokuBoard, rng: np.random.Generator) -> Step:
        try:
            return sudoku_expert_step(state, rng)
        except DeadEndError as dead:
            value = 1 + int(rng.integers(9))
            fill = (dead.row, dead.col, value)
            return Step(
                content=SudokuMove((fill,), True, state.with_fills((fill,)))
            )


class SudokuTransition:
    def apply(self, state: SudokuBoard, step: Step) -> SudokuBoard:
        if step.is_answer:
            return state
        move = step.content
        if not isinstance(move, SudokuMove):
            raise ValueError("sudoku transition got a non-move step")
        return move.new_board


def _fills_well_formed(move: SudokuMove) -> bool:
    if not move.fills:
        return False
    seen = set()
    for row, col, value in move.fills:
        if not (0 <= row < 9 and 0 <= col < 9 and 1 <= value <= 9):
            return False
        if (row, col) in seen:
            return False
        seen.add((row, col))
    return True


def verify_binary_sudoku(state: SudokuBoard, step: Step) -> Verification:
    """Single label: no already-filled cell modified and the new board has
    no duplicate in any unit."""
    if step.is_answer:
        ok = (
            isinstance(step.content, SudokuBoard)
            and state.full
            and consistent(state)
            and step.content == state
        )
        return Verification((ok,))
    move = step.content
    if not isinstance(move, SudokuMove) or not _fills_well_formed(move):
        return Verification((False,))
    preserved = all(
        new == old
        for old, new in zip(state.cells, move.new_board.cells)
        if old != 0
    )
    return Verification((preserved and consistent(move.new_board),))


def sorted_fills(move: SudokuMove) -> tuple[tuple[int, int, int], ...]:
    """Fills in row-major order, the frozen labeling order."""
    return tuple(sorted(move.fills, key=lambda f: (f[0], f[1])))


def verify_detailed_sudoku(state: SudokuBoard, step: Step) -> Verification:
    """One label per filled position, row-major: the fill must target a
    blank of the old board and not collide with any other value in its row,
    column, or block of the new board."""
    if step.is_answer:
        return verify_binary_sudoku(state, step)
    move = step.content
    if not isinstance(move, SudokuMove) or not _fills_well_formed(move):
        return Verification((False,))
    new = move.new_board
    labels = []
    for row, col, value in sorted_fills(move):
        ok = state.get(row, col) == 0 and new.get(row, col) == value
        if ok:
            for rr in range(9):
                if rr != row and new.get(rr, col) == value:
                    ok = False
                    break
        if ok:
            for cc in range(9):
                if cc != col and new.get(row, cc) == value:
                    ok = False
                    break
        if ok:
            br, bc = 3 * (row // 3), 3 * (col // 3)
            for rr in range(br, br + 3):
                for cc in range(bc, bc + 3):
                    if (rr, cc) != (row, col) and new.get(rr, cc) == value:
                        ok = False
                        break
                else:
                    continue
                break
        labels.append(ok)
    return Verification(tuple(labels))


def misfill(
    state: SudokuBoard,
    move: SudokuMove,
    rng: np.random.Generator,
    require_conflict: bool = False,
) -> Optional[tuple[SudokuMove, int]]:
    """Replace one fill's value with a wrong one.

    With require_conflict the replacement must break rule-consistency of the
    new board (None is returned when no replacement at that position does).
    Returns the corrupted move and the row-major label index of the
    corrupted fill.
    """
    fi = int(rng.integers(len(move.fills)))
    row, col, honest = move.fills[fi]
    wrong = [v for v in range(1, 10) if v != honest]
    order = rng.permutation(len(wrong))
    base_cells = list(move.new_board.cells)
    chosen: Optional[int] = None
    for oi in order:
        candidate = wrong[int(oi)]
        if not require_conflict:
            chosen = candidate
            break
        base_cells[row * 9 + col] = candidate
        if _masks(base_cells) is None:
            chosen = candidate
            break
    base_cells[row * 9 + col] = move.new_board.get(row, col)
    if chosen is None:
        return None
    fills = tuple(
        (row, col, chosen) if i == fi else f for i, f in enumerate(move.fills)
    )
    new_board = state.with_fills(fills)
    corrupted = SudokuMove(fills, move.guess, new_board)
    label_index = sorted_fills(corrupted).index((row, col, chosen))
    return (corrupted, label_index)
