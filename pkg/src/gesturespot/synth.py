"""Synthetic gesture benchmark generator.

Class templates are smooth random trajectories (low-pass-filtered Gaussian
steps, cumulatively summed). Training samples are time-warped,
noise-perturbed copies of a template; test streams embed such instances
between segments of far-off-distribution noise frames and record the exact
ground truth. Everything is driven by one seeded RNG, so a fixed config +
seed reproduces the dataset byte for byte.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .seqmodel import Dataset, LabeledInterval, Sequence


@dataclass(frozen=True)
class SynthConfig:
    n_classes: int = 3
    samples_per_class: int = 10
    n_streams: int = 2
    instances_per_stream: int = 10
    dim: int = 2
    template_len_min: int = 24
    template_len_max: int = 40
    length_jitter: float = 0.15
    warp: float = 0.2
    scale_jitter: float = 0.35
    noise: float = 0.12
    gap_min: int = 20
    gap_max: int = 60
    background: str = "walk"
    noise_amplitude: float = 4.0
    seed: int = 7

    def __post_init__(self):
        if self.n_classes < 1 or self.samples_per_class < 2:
            raise ValueError("need >= 1 class and >= 2 samples per class")
        if self.template_len_min < 8 or self.template_len_max < self.template_len_min:
            raise ValueError("template length range invalid")
        if not (0 <= self.length_jitter < 1 and 0 <= self.warp < 1):
            raise ValueError("length_jitter and warp must lie in [0, 1)")
        if not 0 <= self.scale_jitter < 1:
            raise ValueError("scale_jitter must lie in [0, 1)")
        if self.noise < 0 or self.noise_amplitude <= 0:
            raise ValueError("noise must be >= 0, noise_amplitude > 0")
        if self.gap_min < 1 or self.gap_max < self.gap_min:
            raise ValueError("gap range invalid")
        if self.background not in ("walk", "uniform"):
            raise ValueError("background must be 'walk' or 'uniform'")

    def class_names(self) -> list[str]:
        return [f"class_{i}" for i in range(self.n_classes)]

    def to_dict(self) -> dict:
        return asdict(self)


def _smooth_trajectory(rng: np.random.Generator, length: int, dim: int,
                       window: int = 5) -> np.ndarray:
    steps = rng.standard_normal((length + window - 1, dim))
    kernel = np.ones(window) / window
    smoothed = np.stack(
        [np.convolve(steps[:, k], kernel, mode="valid") for k in range(dim)], axis=1)
    traj = np.cumsum(smoothed, axis=0) * 0.3
    return traj - traj.mean(axis=0)


def _instance(rng: np.random.Generator, template: np.ndarray,
              cfg: SynthConfig) -> np.ndarray:
    """Time-warped, amplitude-scaled, noise-perturbed copy of a template.

    The amplitude scale is the intra-class variability DTW alignment cannot
    absorb; it is what separates one-class models from a single template.
    """
    n = template.shape[0]
    target = max(8, int(round(n * (1.0 + rng.uniform(-cfg.length_jitter, cfg.length_jitter)))))
    speeds = rng.uniform(1.0 - cfg.warp, 1.0 + cfg.warp, size=target)
    ts = np.cumsum(speeds)
    ts = (ts - ts[0]) / (ts[-1] - ts[0]) * (n - 1)
    warped = np.stack(
        [np.interp(ts, np.arange(n), template[:, k]) for k in range(template.shape[1])],
        axis=1)
    warped = warped * rng.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter)
    if cfg.noise > 0:
        warped = warped + rng.normal(0.0, cfg.noise, size=warped.shape)
    return warped


def _noise_block(rng: np.random.Generator, length: int, cfg: SynthConfig) -> np.ndarray:
    """Background segment between instances.

    "walk" produces smooth trajectories from the same family as the class
    templates (movement that is not any trained gesture); "uniform" gives
    far-off-distribution i.i.d. frames, which no calibrated detector should
    ever fire on.
    """
    if cfg.background == "uniform":
        return rng.uniform(-cfg.noise_amplitude, cfg.noise_amplitude,
                           size=(length, cfg.dim))
    walk = _smooth_trajectory(rng, length, cfg.dim)
    walk = walk * rng.uniform(0.7, 1.5) + rng.normal(0.0, cfg.noise, size=walk.shape)
    return walk


def generate(cfg: SynthConfig) -> tuple[Dataset, Dataset]:
    """Returns (training dataset, stream dataset with exact ground truth)."""
    rng = np.random.default_rng(cfg.seed)
    names = cfg.class_names()
    templates = {}
    for name in names:
        length = int(rng.integers(cfg.template_len_min, cfg.template_len_max + 1))
        templates[name] = _smooth_trajectory(rng, length, cfg.dim)

    train_seqs: list[Sequence] = []
    train_labels: dict[str, tuple[LabeledInterval, ...]] = {}
    for name in names:
        for i in range(cfg.samples_per_class):
            frames = _instance(rng, templates[name], cfg)
            sid = f"{name}_train_{i:02d}"
            train_seqs.append(Sequence(sid, frames))
            train_labels[sid] = (LabeledInterval(name, 0, frames.shape[0] - 1),)
    train = Dataset(tuple(train_seqs), train_labels)

    stream_seqs: list[Sequence] = []
    stream_labels: dict[str, tuple[LabeledInterval, ...]] = {}
    for s in range(cfg.n_streams):
        chunks = [_noise_block(rng, int(rng.integers(cfg.gap_min, cfg.gap_max + 1)), cfg)]
        pos = chunks[0].shape[0]
        labels: list[LabeledInterval] = []
        for k in range(cfg.instances_per_stream):
            name = names[(s * cfg.instances_per_stream + k) % len(names)]
            inst = _instance(rng, templates[name], cfg)
            labels.append(LabeledInterval(name, pos, pos + inst.shape[0] - 1))
            chunks.append(inst)
            pos += inst.shape[0]
            gap = _noise_block(rng, int(rng.integers(cfg.gap_min, cfg.gap_max + 1)), cfg)
            chunks.append(gap)
            pos += gap.shape[0]
        sid = f"stream_{s:02d}"
        stream_seqs.append(Sequence(sid, np.vstack(chunks)))
        stream_labels[sid] = tuple(labels)
    streams = Dataset(tuple(stream_seqs), stream_labels)
    return train, streams
