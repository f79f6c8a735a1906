"""Pre-training alignment of class samples to the median-length sample.

Every sample of a class is warped onto the reference (the sample at
position floor(N/2) of the ascending-length sort, stable on ties) with
closed-start Euclidean DTW, yielding N equal-length sequences whose
per-time-step columns feed the one-class models.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dtw import dtw_align, frame_cost_euclidean
from .seqmodel import Sequence


@dataclass(frozen=True, eq=False)
class WarpedClassSet:
    """N warped sequences stacked as an (N, L, d) array."""

    class_name: str
    reference_id: str
    warped: np.ndarray
    sample_ids: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.warped, dtype=float)
        if arr.ndim != 3 or arr.shape[0] == 0:
            raise ValueError("warped must be a non-empty (N, L, d) array")
        if len(self.sample_ids) != arr.shape[0]:
            raise ValueError("one sample id per warped sequence required")
        arr.flags.writeable = False
        object.__setattr__(self, "warped", arr)

    @property
    def length(self) -> int:
        return self.warped.shape[1]

    @property
    def dim(self) -> int:
        return self.warped.shape[2]

    @property
    def n_samples(self) -> int:
        return self.warped.shape[0]

    def column(self, t: int) -> np.ndarray:
        """All samples' frames at reference time t, (N, d)."""
        return self.warped[:, t, :]

    def mean_sequence(self, seq_id: str = "mean") -> Sequence:
        return Sequence(seq_id, self.warped.mean(axis=0))


def select_reference(samples: list[Sequence]) -> Sequence:
    """Sample at index floor(N/2) of the ascending-length stable sort."""
    if not samples:
        raise ValueError("empty sample list")
    ordered = sorted(samples, key=len)
    return ordered[len(ordered) // 2]


def warp_to_reference(sample: Sequence, reference: Sequence) -> Sequence:
    """Warp one sample onto the reference length.

    Sample frames that the optimal closed-start warping path maps onto the
    same reference index are averaged; a sample frame spanning several
    reference indices is repeated. Output length equals the reference's.
    """
    if sample.dim != reference.dim:
        raise ValueError(f"dimension mismatch: {sample.dim} vs {reference.dim}")
    _, path = dtw_align(reference, sample, frame_cost_euclidean)
    groups: dict[int, list[int]] = {}
    for i, j in path.steps:
        groups.setdefault(i, []).append(j - 1)
    out = np.empty((len(reference), reference.dim))
    for t in range(1, len(reference) + 1):
        out[t - 1] = sample.frames[groups[t]].mean(axis=0)
    return Sequence(sample.id, out, sample.frame_rate)


def build_warped_set(samples: list[Sequence], class_name: str = "") -> WarpedClassSet:
    """Warp every sample (reference included) onto the reference."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to model a class")
    dims = {s.dim for s in samples}
    if len(dims) != 1:
        raise ValueError(f"samples disagree on dimension: {sorted(dims)}")
    reference = select_reference(samples)
    warped = [warp_to_reference(s, reference) for s in samples]
    return WarpedClassSet(class_name, reference.id,
                          np.stack([w.frames for w in warped]),
                          tuple(s.id for s in samples))
