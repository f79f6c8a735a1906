"""Evaluation protocol: overlap with Don't-Care bits, accuracy at the 60%
rule, rank aggregation and the Friedman / Iman-Davenport / Nemenyi tests.

The Don't-Care value masks that many frames on each side of every
ground-truth interval boundary (just-inside and just-outside of both the
begin and the end) out of both timelines before the Jaccard overlap is
computed, forgiving predictions that are merely shifted a few frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence as SequenceABC

import numpy as np
from scipy import stats

from .seqmodel import LabeledInterval
from .spotting import DetectionResult

ACCURACY_MIN_OVERLAP = 0.60

# Two-tailed Nemenyi critical values q_alpha (studentized range / sqrt 2,
# infinite df) for h = 2..10 methods; alpha 0.05/0.10 match Demsar's table.
NEMENYI_Q = {
    0.05: {2: 1.9600, 3: 2.3437, 4: 2.5690, 5: 2.7278, 6: 2.8497,
           7: 2.9483, 8: 3.0309, 9: 3.1017, 10: 3.1637},
    0.10: {2: 1.6449, 3: 2.0523, 4: 2.2913, 5: 2.4595, 6: 2.5885,
           7: 2.6927, 8: 2.7799, 9: 2.8546, 10: 2.9199},
    0.25: {2: 1.1503, 3: 1.5898, 4: 1.8499, 5: 2.0333, 6: 2.1738,
           7: 2.2873, 8: 2.3822, 9: 2.4634, 10: 2.5343},
}


@dataclass(frozen=True, eq=False)
class BinaryTimeline:
    """Frame-level activity as a set of active indices."""

    length: int
    active: frozenset[int]

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be >= 0")
        active = frozenset(int(i) for i in self.active)
        if any(i < 0 or i >= self.length for i in active):
            raise ValueError("active indices out of range")
        object.__setattr__(self, "active", active)

    @classmethod
    def from_intervals(cls, length: int, intervals: Iterable[tuple[int, int]]
                       ) -> "BinaryTimeline":
        active = set()
        for b, e in intervals:
            active.update(range(b, e + 1))
        return cls(length, frozenset(active))

    def intervals(self) -> list[tuple[int, int]]:
        """Maximal active runs as inclusive (begin, end) pairs."""
        out = []
        run_start = None
        prev = None
        for i in sorted(self.active):
            if run_start is None:
                run_start = prev = i
            elif i == prev + 1:
                prev = i
            else:
                out.append((run_start, prev))
                run_start = prev = i
        if run_start is not None:
            out.append((run_start, prev))
        return out


def _dont_care_mask(g: BinaryTimeline, dont_care: int) -> set[int]:
    masked: set[int] = set()
    for b, e in g.intervals():
        masked.update(range(max(0, b - dont_care), min(g.length, b + dont_care)))
        masked.update(range(max(0, e - dont_care + 1), min(g.length, e + dont_care + 1)))
    return masked


def overlap_components(g: BinaryTimeline, p: BinaryTimeline,
                       dont_care: int = 0) -> tuple[int, int]:
    """(|g & p|, |g | p|) after masking; lets callers pool across streams."""
    if g.length != p.length:
        raise ValueError(f"timeline length mismatch: {g.length} vs {p.length}")
    if dont_care < 0:
        raise ValueError("dont_care must be >= 0")
    masked = _dont_care_mask(g, dont_care)
    ga = g.active - masked
    pa = p.active - masked
    return len(ga & pa), len(ga | pa)


def overlap(g: BinaryTimeline, p: BinaryTimeline, dont_care: int = 0) -> float:
    """Jaccard overlap after masking Don't-Care frames out of both sides.

    Returns 1.0 when both timelines are empty after masking.
    """
    inter, union = overlap_components(g, p, dont_care)
    if union == 0:
        return 1.0
    return inter / union


def count_matched(detections: SequenceABC[DetectionResult],
                  labels: SequenceABC[LabeledInterval],
                  length: int, dont_care: int = 0) -> int:
    """Ground-truth instances matched by some detection at > 60% overlap.

    Each instance's overlap is computed on its own sub-timeline with the
    instance's Don't-Care masking; one detection may validate at most one
    instance (greedy assignment by descending overlap).
    """
    inst_timelines = [BinaryTimeline.from_intervals(length, [(iv.begin, iv.end)])
                      for iv in labels]
    det_timelines = [BinaryTimeline.from_intervals(length, [(d.begin, d.end)])
                     for d in detections]
    pairs = []
    for ii, g in enumerate(inst_timelines):
        for di, p in enumerate(det_timelines):
            ov = overlap(g, p, dont_care)
            if ov > ACCURACY_MIN_OVERLAP:
                pairs.append((ov, ii, di))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_inst: set[int] = set()
    used_det: set[int] = set()
    for _, ii, di in pairs:
        if ii in used_inst or di in used_det:
            continue
        used_inst.add(ii)
        used_det.add(di)
    return len(used_inst)


def accuracy(detections: SequenceABC[DetectionResult],
             labels: SequenceABC[LabeledInterval],
             length: int, dont_care: int = 0) -> float:
    """Fraction of ground-truth instances matched; 1.0 when there are none."""
    if not labels:
        return 1.0
    return count_matched(detections, labels, length, dont_care) / len(labels)


@dataclass(frozen=True, eq=False)
class RankTable:
    """Per-experiment ranks (1 = best) for h methods over U experiments."""

    methods: tuple[str, ...]
    ranks: np.ndarray  # (U, h), ties share the average rank

    def __post_init__(self):
        arr = np.asarray(self.ranks, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != len(self.methods):
            raise ValueError("ranks must be (U, h) with one column per method")
        h = arr.shape[1]
        expect = h * (h + 1) / 2
        if not np.allclose(arr.sum(axis=1), expect, atol=1e-9):
            raise ValueError(f"each rank row must sum to {expect}")
        arr.flags.writeable = False
        object.__setattr__(self, "ranks", arr)

    @property
    def n_experiments(self) -> int:
        return self.ranks.shape[0]

    @property
    def n_methods(self) -> int:
        return self.ranks.shape[1]

    @property
    def mean_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)


def rank_methods(scores, methods: SequenceABC[str],
                 higher_is_better: bool = True) -> RankTable:
    """Rank methods per experiment row; tied scores share the average rank."""
    arr = np.asarray(scores, dtype=float)
    if arr.ndim != 2:
        raise ValueError("scores must be (U, h)")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores must be finite")
    signed = -arr if higher_is_better else arr
    ranks = np.vstack([stats.rankdata(row, method="average") for row in signed])
    return RankTable(tuple(methods), ranks)


def friedman(table: RankTable) -> tuple[float, float]:
    """Friedman chi-square over mean ranks plus the Iman-Davenport F."""
    u, h = table.n_experiments, table.n_methods
    if u < 2 or h < 2:
        raise ValueError("need at least 2 experiments and 2 methods")
    v = table.mean_ranks
    x2 = (12.0 * u) / (h * (h + 1)) * (float(np.sum(v ** 2)) - h * (h + 1) ** 2 / 4.0)
    return x2, iman_davenport(x2, u, h)


def iman_davenport(x2: float, n_experiments: int, n_methods: int) -> float:
    """Corrected statistic F_F = (U-1) X^2 / (U(h-1) - X^2)."""
    u, h = n_experiments, n_methods
    denom = u * (h - 1) - x2
    if denom <= 0:
        return math.inf
    return (u - 1) * x2 / denom


def friedman_pvalue(f_f: float, n_experiments: int, n_methods: int) -> float:
    """Right-tail p of F_F under F((h-1), (h-1)(U-1))."""
    u, h = n_experiments, n_methods
    return float(stats.f.sf(f_f, h - 1, (h - 1) * (u - 1)))


def nemenyi_q(n_methods: int, alpha: float = 0.05) -> float:
    try:
        return NEMENYI_Q[alpha][n_methods]
    except KeyError:
        raise ValueError(
            f"no q value tabulated for h={n_methods}, alpha={alpha}; "
            f"available alphas {sorted(NEMENYI_Q)} for h in 2..10") from None


def nemenyi_cd(n_methods: int, n_experiments: int, q_alpha: float) -> float:
    """Critical difference q_alpha * sqrt(h(h+1) / (6U))."""
    if n_methods < 2 or n_experiments < 1 or q_alpha < 0:
        raise ValueError("need h >= 2, U >= 1, q_alpha >= 0")
    return q_alpha * math.sqrt(n_methods * (n_methods + 1) / (6.0 * n_experiments))
