"""Dynamic time warping core.

Closed-start alignment between two concrete sequences, the open-start
streaming cost matrix used for begin-end spotting, and warping-path
backtracking. Frame costs are pluggable; the recurrence is the plain
three-neighbour one:

    M(i, j) = d(i, j) + min(M(i-1, j-1), M(i, j-1), M(i-1, j))

Matrix convention: rows 0..m index the model (row 0 is the boundary row,
row i >= 1 is model frame i-1), columns 0..n index the query (column 0 is
the boundary column, column j >= 1 is query frame j-1). Closed-start mode
sets cell(0,0)=0 and the rest of row 0 to +inf; open-start mode zeroes the
whole boundary row so a match may begin at any query position.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

# Per-cell provenance tags: which neighbour minimised the recurrence.
MOVE_NONE = 0
MOVE_DIAG = 1  # predecessor (i-1, j-1)
MOVE_LEFT = 2  # predecessor (i,   j-1)
MOVE_UP = 3    # predecessor (i-1, j)


def frame_cost_euclidean(a: np.ndarray, b: np.ndarray) -> float:
    """L2 distance between two equal-dimension frame vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"frame dimension mismatch: {a.shape} vs {b.shape}")
    diff = a - b
    return float(math.sqrt(float(np.dot(diff, diff))))


@dataclass(frozen=True)
class WarpingPath:
    """Monotone, contiguous sequence of (row, col) matrix cells, rows/cols 1-based."""

    steps: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not self.steps:
            raise ValueError("empty warping path")
        for (a1, b1), (a0, b0) in zip(self.steps[1:], self.steps[:-1]):
            da, db = a1 - a0, b1 - b0
            if da not in (0, 1) or db not in (0, 1) or (da == 0 and db == 0):
                raise ValueError(f"path violates continuity/monotonicity at {(a0, b0)}->{(a1, b1)}")

    @property
    def tau(self) -> int:
        return len(self.steps)

    @property
    def begin_col(self) -> int:
        """Matrix column of the first aligned query frame."""
        return self.steps[0][1]

    @property
    def end_col(self) -> int:
        return self.steps[-1][1]


class CostMatrix:
    """Accumulated-cost matrix advanced one query column at a time.

    Holds only the most recent column of costs plus a ring buffer of
    per-cell move tags so that a detection can be backtracked without
    storing every past column. ``move_buffer=None`` picks the default
    (4x the model length in open-start mode, unlimited in closed-start
    mode); 0 keeps every column; a positive value is the ring depth. The
    begin point of a detection cannot precede its end by more than the
    buffer depth; raise it for very long gestures.
    """

    def __init__(self, model_len: int, open_start: bool = False,
                 move_buffer: int | None = None):
        if model_len < 1:
            raise ValueError("model_len must be >= 1")
        self.model_len = model_len
        self.open_start = open_start
        if move_buffer is None:
            move_buffer = 4 * model_len if open_start else 0
        if move_buffer < 0:
            raise ValueError("move_buffer must be >= 0")
        self.move_buffer = move_buffer
        self.n_cols = 0
        # Column 0 (boundary): cell(0,0)=0, cells below +inf in both modes.
        self._col = np.full(model_len + 1, math.inf)
        self._col[0] = 0.0
        self._moves: deque[np.ndarray] = deque(
            maxlen=None if move_buffer == 0 else move_buffer)

    @property
    def bottom(self) -> float:
        """Current bottom-cell value M(m, n_cols)."""
        return float(self._col[self.model_len])

    @property
    def column(self) -> np.ndarray:
        """Copy of the most recent column, rows 0..m."""
        return self._col.copy()

    def _move_column(self, col: int) -> np.ndarray:
        first = self.n_cols - len(self._moves) + 1
        idx = col - first
        if idx < 0:
            raise ValueError(
                f"column {col} fell out of the move buffer "
                f"(depth {self.move_buffer}); raise move_buffer")
        if col > self.n_cols:
            raise ValueError(f"column {col} out of range (have {self.n_cols})")
        return self._moves[idx]

    def update(self, model_costs) -> float:
        """Append one query column; returns the new bottom-cell value."""
        m = self.model_len
        costs = np.asarray(model_costs, dtype=float)
        if costs.shape != (m,):
            raise ValueError(f"expected {m} model costs, got shape {costs.shape}")
        if not np.all(np.isfinite(costs)) or np.any(costs < 0):
            raise ValueError("model costs must be finite and non-negative")
        prev = self._col
        new = np.empty(m + 1)
        new[0] = 0.0 if self.open_start else math.inf
        moves = np.zeros(m + 1, dtype=np.int8)
        for i in range(1, m + 1):
            diag = prev[i - 1]
            left = prev[i]
            up = new[i - 1]
            # tie-break: diag > left > up
            best, tag = diag, MOVE_DIAG
            if left < best:
                best, tag = left, MOVE_LEFT
            if up < best:
                best, tag = up, MOVE_UP
            if math.isinf(best):
                new[i] = math.inf
                moves[i] = MOVE_NONE
            else:
                new[i] = costs[i - 1] + best
                moves[i] = tag
        self._col = new
        self._moves.append(moves)
        self.n_cols += 1
        return float(new[m])


def stream_column_update(state: CostMatrix, model_costs) -> CostMatrix:
    """Advance the streaming matrix by one query frame's per-row costs."""
    state.update(model_costs)
    return state


def backtrack(state: CostMatrix, end_col: int) -> WarpingPath:
    """Walk move tags from (m, end_col) back to the boundary row.

    Returns the path in forward order; its first step's column minus one is
    the 0-based query frame where the match begins.
    """
    if end_col < 1 or end_col > state.n_cols:
        raise ValueError(f"end_col {end_col} out of range (1..{state.n_cols})")
    i, j = state.model_len, end_col
    steps = [(i, j)]
    while True:
        tag = int(state._move_column(j)[i])
        if tag == MOVE_NONE:
            raise ValueError(f"no finite path through cell ({i}, {j})")
        if tag == MOVE_DIAG:
            i, j = i - 1, j - 1
        elif tag == MOVE_LEFT:
            j = j - 1
        else:  # MOVE_UP
            i = i - 1
        if i == 0:
            break
        if j == 0:
            raise ValueError("backtracking crossed the boundary column with i > 0")
        steps.append((i, j))
    steps.reverse()
    return WarpingPath(tuple(steps))


def dtw_align(c, q, cost: Callable[[np.ndarray, np.ndarray], float] = frame_cost_euclidean,
              ) -> tuple[float, WarpingPath]:
    """Closed-start DTW of model frames ``c`` (rows) against query ``q`` (columns).

    Returns the accumulated terminal cost divided by the length tau of the
    backtracked minimising path (tau compensates different path lengths),
    together with that path. Ties between equal-cost predecessors resolve
    diag > left > up, so the result is deterministic.
    """
    c_frames = _frames_of(c)
    q_frames = _frames_of(q)
    m, n = len(c_frames), len(q_frames)
    if m == 0 or n == 0:
        raise ValueError("both sequences must be non-empty")
    if c_frames[0].shape != q_frames[0].shape:
        raise ValueError("sequences must share the frame dimension")
    matrix = CostMatrix(m, open_start=False, move_buffer=None)
    for j in range(n):
        col_costs = [cost(c_frames[i], q_frames[j]) for i in range(m)]
        matrix.update(col_costs)
    terminal = matrix.bottom
    path = backtrack(matrix, n)
    if path.steps[0] != (1, 1):
        raise AssertionError("closed-start path must begin at (1, 1)")
    return terminal / path.tau, path


def _frames_of(seq) -> list[np.ndarray]:
    frames = getattr(seq, "frames", seq)
    arr = np.asarray(frames, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return [arr[i] for i in range(arr.shape[0])]
