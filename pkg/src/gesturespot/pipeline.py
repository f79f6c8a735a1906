"""End-to-end orchestration: per-class training, leave-one-out calibration,
stream spotting and the four-method comparison protocol.

The two baselines align streams against a single template with plain
Euclidean frame costs, reusing the same streaming machinery as the
one-class models: "random" picks a training sample with the run seed,
"mean" uses the frame-wise mean of the warped class set.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .align import build_warped_set
from .evaluate import (BinaryTimeline, RankTable, count_matched, friedman,
                       friedman_pvalue, nemenyi_cd, nemenyi_q,
                       overlap_components, rank_methods)
from .seqmodel import Dataset, GestureModel, Sequence
from .spotting import CalibrationReport, DetectionResult, calibrate_threshold, spot
from .train import train_ape_gesture_model, train_gmm_gesture_model

METHODS = ("dtw-random", "dtw-mean", "dtw-gmm", "dtw-ape")


@dataclass(frozen=True)
class ModelParams:
    n_components: int = 3
    diagonal: bool = False
    n_projections: int = 25
    p: int = 2
    phi: float = 0.0


@dataclass(frozen=True, eq=False)
class TemplateModel:
    """Single-template spotter with Euclidean frame costs."""

    class_name: str
    template: np.ndarray
    threshold: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.template, dtype=float)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("template must be a non-empty (L, d) array")
        arr.flags.writeable = False
        object.__setattr__(self, "template", arr)

    @property
    def model_length(self) -> int:
        return self.template.shape[0]

    @property
    def dim(self) -> int:
        return self.template.shape[1]

    def row_costs(self, q: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.template - q, axis=1)

    def with_threshold(self, threshold: float) -> "TemplateModel":
        return replace(self, threshold=float(threshold))


def derive_seed(master: int, *key: int) -> int:
    """Stable integer sub-seed for a (method, class, ...) slot."""
    return int(np.random.SeedSequence(master, spawn_key=key).generate_state(1)[0])


def make_trainer(method: str, class_name: str, params: ModelParams,
                 seed: int) -> Callable[[list[Sequence]], object]:
    if method == "dtw-gmm":
        return lambda samples: train_gmm_gesture_model(
            build_warped_set(samples, class_name), params.n_components,
            seed=seed, diagonal=params.diagonal)
    if method == "dtw-ape":
        return lambda samples: train_ape_gesture_model(
            build_warped_set(samples, class_name), params.n_projections,
            params.p, params.phi, seed=seed)
    if method == "dtw-mean":
        return lambda samples: TemplateModel(
            class_name, build_warped_set(samples, class_name).warped.mean(axis=0))
    if method == "dtw-random":
        def trainer(samples: list[Sequence]) -> TemplateModel:
            rng = np.random.default_rng(seed)
            pick = int(rng.integers(len(samples)))
            return TemplateModel(class_name, samples[pick].frames)
        return trainer
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def train_class_model(dataset: Dataset, class_name: str, variant: str,
                      params: ModelParams, seed: int) -> GestureModel:
    """Uncalibrated gesture model for one class of a dataset."""
    samples = dataset.class_samples(class_name)
    trainer = make_trainer(f"dtw-{variant}", class_name, params, seed)
    return trainer(samples)


def calibrate_class_model(dataset: Dataset, class_name: str, variant: str,
                          params: ModelParams, seed: int) -> CalibrationReport:
    samples = dataset.class_samples(class_name)
    trainer = make_trainer(f"dtw-{variant}", class_name, params, seed)
    return calibrate_threshold(samples, trainer)


@dataclass(frozen=True)
class EvalRow:
    class_name: str
    method: str
    dont_care: int
    overlap: float
    accuracy: float


@dataclass(frozen=True, eq=False)
class EvalOutcome:
    methods: tuple[str, ...]
    classes: tuple[str, ...]
    dont_care_values: tuple[int, ...]
    rows: tuple[EvalRow, ...]
    experiment_ids: tuple[str, ...]
    rank_table: RankTable
    x2: float
    f_f: float
    p_value: float
    critical_differences: dict[float, float]
    detections: dict[tuple[str, str, str], tuple[DetectionResult, ...]]
    thresholds: dict[tuple[str, str], float]

    def row(self, class_name: str, method: str, dont_care: int) -> EvalRow:
        for r in self.rows:
            if (r.class_name, r.method, r.dont_care) == (class_name, method, dont_care):
                return r
        raise KeyError((class_name, method, dont_care))


def run_eval(train_ds: Dataset, test_ds: Dataset,
             methods: tuple[str, ...] = METHODS,
             dont_care_values: tuple[int, ...] = (0, 2, 5, 10),
             params: ModelParams = ModelParams(), seed: int = 1234,
             strict_first_hit: bool = False) -> EvalOutcome:
    """Train, calibrate and spot every (method, class), then rank methods.

    Overlap and matched-instance counts pool across streams; each
    (class, dont-care, metric) triple is one ranking experiment.
    """
    classes = tuple(sorted(train_ds.class_names))
    if not classes:
        raise ValueError("training dataset has no labelled classes")
    streams = list(test_ds.sequences)

    detections: dict[tuple[str, str, str], tuple[DetectionResult, ...]] = {}
    thresholds: dict[tuple[str, str], float] = {}
    for mi, method in enumerate(methods):
        for ci, cls in enumerate(classes):
            sub_seed = derive_seed(seed, mi, ci)
            samples = train_ds.class_samples(cls)
            trainer = make_trainer(method, cls, params, sub_seed)
            report = calibrate_threshold(samples, trainer)
            model = trainer(samples).with_threshold(report.threshold)
            thresholds[(method, cls)] = report.threshold
            for stream in streams:
                dets = spot(model, stream, strict_first_hit=strict_first_hit)
                detections[(method, cls, stream.id)] = tuple(dets)

    rows: list[EvalRow] = []
    for cls in classes:
        for method in methods:
            for dc in dont_care_values:
                inter = union = matched = total = 0
                for stream in streams:
                    labels = [iv for iv in test_ds.labels.get(stream.id, ())
                              if iv.class_name == cls]
                    dets = detections[(method, cls, stream.id)]
                    g = BinaryTimeline.from_intervals(
                        len(stream), [(iv.begin, iv.end) for iv in labels])
                    p = BinaryTimeline.from_intervals(
                        len(stream), [(d.begin, d.end) for d in dets])
                    i, u = overlap_components(g, p, dc)
                    inter, union = inter + i, union + u
                    matched += count_matched(dets, labels, len(stream), dc)
                    total += len(labels)
                rows.append(EvalRow(
                    cls, method, dc,
                    1.0 if union == 0 else inter / union,
                    1.0 if total == 0 else matched / total))

    experiment_ids = []
    scores = []
    for cls in classes:
        for dc in dont_care_values:
            for metric in ("overlap", "accuracy"):
                experiment_ids.append(f"{cls}/dc{dc}/{metric}")
                per_method = []
                for method in methods:
                    row = next(r for r in rows
                               if (r.class_name, r.method, r.dont_care) == (cls, method, dc))
                    per_method.append(getattr(row, metric))
                scores.append(per_method)
    table = rank_methods(np.array(scores), methods, higher_is_better=True)
    x2, f_f = friedman(table)
    p_value = friedman_pvalue(f_f, table.n_experiments, table.n_methods)
    cds = {}
    for alpha in (0.05, 0.10, 0.25):
        try:
            q = nemenyi_q(len(methods), alpha)
        except ValueError:
            continue
        cds[alpha] = nemenyi_cd(len(methods), table.n_experiments, q)
    return EvalOutcome(tuple(methods), classes, tuple(dont_care_values),
                       tuple(rows), tuple(experiment_ids), table, x2, f_f,
                       p_value, cds, detections, thresholds)
