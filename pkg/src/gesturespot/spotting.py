"""Begin-end detection over an unbounded query stream, plus threshold
calibration.

Each incoming frame is scored against every per-frame one-class model
(m soft distances), the open-start matrix advances one column, and a
detection fires when the bottom cell drops below the calibrated threshold.
The raw bottom value is compared against beta, not the tau-normalised
alignment cost; calibration absorbs the scale difference.

By default the detector refines the first hit to a local minimum: once the
bottom value drops below beta it keeps consuming frames until the value
rises back above beta (or the stream ends) and emits at the minimum of
that excursion, so a brief mid-descent up-tick cannot split one gesture
into two detections. ``strict_first_hit=True`` emits at the very first
crossing instead. After a detection the matrix is reset and the stream
rewinds to the frame right after the detected end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dtw import CostMatrix, WarpingPath, backtrack
from .seqmodel import Sequence


@dataclass(frozen=True)
class DetectionResult:
    """One detected instance: 0-based inclusive [begin, end] frames."""

    class_name: str
    begin: int
    end: int
    terminal_cost: float
    path: WarpingPath

    def __post_init__(self):
        if self.begin > self.end:
            raise ValueError("detection begin must not exceed end")


@dataclass(frozen=True)
class CalibrationReport:
    """Leave-one-out threshold search over a data-driven candidate grid."""

    threshold: float
    candidate_grid: tuple[float, ...]
    hit_counts: tuple[int, ...]
    held_out_costs: tuple[float, ...]


class _Session:
    """Matrix plus the absolute frame offset of its first column."""

    def __init__(self, model_len: int, move_buffer: int | None, offset: int):
        self.matrix = CostMatrix(model_len, open_start=True, move_buffer=move_buffer)
        self.offset = offset


def spot(model, stream, strict_first_hit: bool = False,
         move_buffer: int | None = None) -> list[DetectionResult]:
    """Run the begin-end detector over a finite stream.

    ``model`` needs ``model_length``, ``dim``, ``class_name``, a calibrated
    ``threshold`` and ``row_costs(frame) -> (m,) soft distances``; both
    gesture models and plain-template baselines qualify.
    """
    beta = model.threshold
    if beta is None:
        raise ValueError("model has no calibrated threshold; run calibration first")
    frames = stream.frames if isinstance(stream, Sequence) else np.asarray(stream, dtype=float)
    if frames.ndim == 1:
        frames = frames[:, None]
    if frames.shape[1] != model.dim:
        raise ValueError(f"stream dim {frames.shape[1]} != model dim {model.dim}")
    m = model.model_length

    detections: list[DetectionResult] = []
    session = _Session(m, move_buffer, 0)
    pending: tuple[float, int] | None = None  # (best bottom value, matrix col)

    def emit(col: int, value: float) -> None:
        nonlocal session, pending
        path = backtrack(session.matrix, col)
        begin = session.offset + path.begin_col - 1
        end = session.offset + col - 1
        detections.append(DetectionResult(model.class_name, begin, end, value, path))
        session = _Session(m, move_buffer, end + 1)
        pending = None

    # an excursion below beta longer than this is emitted at its running
    # minimum anyway, so the minimum's column never leaves the move buffer
    max_dwell = max(m, session.matrix.move_buffer // 2) \
        if session.matrix.move_buffer else None

    i = 0
    n = frames.shape[0]
    while i < n:
        session.matrix.update(model.row_costs(frames[i]))
        v = session.matrix.bottom
        col = session.matrix.n_cols
        if pending is None:
            if v < beta:
                if strict_first_hit:
                    emit(col, v)
                    i = session.offset  # == i + 1
                    continue
                pending = (v, col)
        elif v < beta and not (max_dwell and col - pending[1] >= max_dwell):
            if v < pending[0]:
                pending = (v, col)
        else:
            emit(pending[1], pending[0])
            i = session.offset  # rewind: the stream restarts after the end
            continue
        i += 1
    if pending is not None:
        emit(pending[1], pending[0])
    return detections


def spotting_cost(model, sample) -> float:
    """Best bottom-cell value the sample would produce while streamed.

    This is the cost leave-one-out calibration records for a held-out
    sample: the sample is detected by a threshold beta iff this value is
    below beta.
    """
    frames = sample.frames if isinstance(sample, Sequence) else np.asarray(sample, dtype=float)
    matrix = CostMatrix(model.model_length, open_start=True, move_buffer=1)
    best = math.inf
    for q in frames:
        matrix.update(model.row_costs(q))
        best = min(best, matrix.bottom)
    return best


def calibrate_threshold(samples: list[Sequence],
                        trainer: Callable[[list[Sequence]], object],
                        ) -> CalibrationReport:
    """Leave-one-out threshold selection.

    Each sample is held out once; the trainer fits a model on the rest and
    the held-out sample's spotting cost is recorded. Candidates are the
    sorted held-out costs, the midpoints between consecutive ones, and one
    value 5% above the maximum; the smallest candidate maximising the hit
    count (hit = cost strictly below the candidate) wins. A bare
    "most hits" rule would degenerate to beta = infinity, hence the grid.

    Soft-distance models cap every frame cost at 1, so no bottom value can
    exceed model_length: a threshold at or above that saturation ceiling
    would fire at every stream position. Candidates reaching the ceiling
    (min over folds of model_length * the model's declared max_row_cost)
    are therefore discarded; if none survive, the training samples are
    indistinguishable from saturation and calibration fails.
    """
    if len(samples) < 2:
        raise ValueError("leave-one-out calibration needs at least 2 samples")
    costs: list[float] = []
    ceiling = math.inf
    for i in range(len(samples)):
        rest = samples[:i] + samples[i + 1:]
        model = trainer(rest)
        costs.append(spotting_cost(model, samples[i]))
        max_row = getattr(model, "max_row_cost", math.inf)
        ceiling = min(ceiling, model.model_length * max_row)
    finite = sorted({c for c in costs if math.isfinite(c)})
    if not finite:
        raise ValueError("every held-out cost is infinite; cannot calibrate")
    grid = list(finite)
    grid.extend(0.5 * (a + b) for a, b in zip(finite, finite[1:]))
    top = finite[-1]
    grid.append(top * 1.05 if top > 0 else 1e-12)
    grid = sorted(g for g in set(grid) if g < ceiling)
    if not grid:
        raise ValueError(
            "every candidate threshold reaches the saturation ceiling "
            f"({ceiling!r}); the models cannot separate the training samples "
            "from arbitrary input")
    hits = [sum(1 for c in costs if c < g) for g in grid]
    best = max(hits)
    threshold = grid[hits.index(best)]
    return CalibrationReport(threshold, tuple(grid), tuple(hits), tuple(costs))
