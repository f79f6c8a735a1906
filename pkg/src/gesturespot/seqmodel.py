"""Core data model: sequences, labelled intervals, datasets, gesture models.

On-disk formats (all indices 0-based, intervals end-inclusive):

* ``<id>.seq.csv``   header line ``dim=<d>``, then one comma-separated
                     frame per row; optional ``<id>.seq.json`` sidecar
                     holding metadata (currently ``frame_rate``).
* ``labels.csv``     header ``sequence_id,class_name,begin,end`` and one
                     labelled interval per row.
* ``<class>.model.json``  versioned, self-describing model file carrying
                     the variant tag ("gmm" | "ape"), the training seed and
                     every numeric parameter at full decimal precision
                     (canonical JSON: sorted keys, repr floats), so
                     save -> load -> save is byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .ape import ApeModel, ProjectedHull, ape_soft_distance
from .gmm import GmmModel, gmm_soft_distance

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class Sequence:
    """Ordered frames of fixed-dimension feature vectors."""

    id: str
    frames: np.ndarray
    frame_rate: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"sequence {self.id!r}: frames must be a non-empty (n, dim) array")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"sequence {self.id!r}: frames must be finite")
        if self.frame_rate is not None and not (self.frame_rate > 0):
            raise ValueError(f"sequence {self.id!r}: frame_rate must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "frames", arr)

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __eq__(self, other) -> bool:
        return (isinstance(other, Sequence) and self.id == other.id
                and self.frame_rate == other.frame_rate
                and np.array_equal(self.frames, other.frames))


@dataclass(frozen=True)
class LabeledInterval:
    """0-based, end-inclusive occurrence of a class on a sequence."""

    class_name: str
    begin: int
    end: int

    def __post_init__(self):
        if not (0 <= self.begin <= self.end):
            raise ValueError(f"invalid interval [{self.begin}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.begin + 1


@dataclass(frozen=True, eq=False)
class Dataset:
    sequences: tuple[Sequence, ...]
    labels: dict[str, tuple[LabeledInterval, ...]]
    class_names: frozenset[str] = field(default=None)  # derived when omitted

    def __post_init__(self):
        seqs = tuple(self.sequences)
        by_id = {s.id: s for s in seqs}
        if len(by_id) != len(seqs):
            raise ValueError("duplicate sequence ids")
        labels = {k: tuple(v) for k, v in self.labels.items()}
        derived = {iv.class_name for ivs in labels.values() for iv in ivs}
        names = frozenset(derived if self.class_names is None else self.class_names)
        if not derived <= names:
            raise ValueError(f"labels use undeclared classes: {sorted(derived - names)}")
        for sid, ivs in labels.items():
            if sid not in by_id:
                raise ValueError(f"unknown sequence id {sid!r} in labels")
            n = len(by_id[sid])
            per_class: dict[str, list[LabeledInterval]] = {}
            for iv in ivs:
                if iv.end >= n:
                    raise ValueError(
                        f"label {iv.class_name!r} [{iv.begin}, {iv.end}] out of range "
                        f"for sequence {sid!r} of length {n}")
                per_class.setdefault(iv.class_name, []).append(iv)
            for cls, group in per_class.items():
                group.sort(key=lambda iv: iv.begin)
                for a, b in zip(group, group[1:]):
                    if b.begin <= a.end:
                        raise ValueError(
                            f"overlapping {cls!r} intervals on {sid!r}: "
                            f"[{a.begin},{a.end}] and [{b.begin},{b.end}]")
        object.__setattr__(self, "sequences", seqs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    def sequence(self, sid: str) -> Sequence:
        for s in self.sequences:
            if s.id == sid:
                return s
        raise KeyError(sid)

    def class_samples(self, class_name: str) -> list[Sequence]:
        """Labelled sub-sequences of a class, as standalone sequences."""
        out = []
        for s in self.sequences:
            for iv in self.labels.get(s.id, ()):
                if iv.class_name == class_name:
                    out.append(Sequence(f"{s.id}[{iv.begin}:{iv.end}]",
                                        s.frames[iv.begin:iv.end + 1],
                                        s.frame_rate))
        return out

    def __eq__(self, other) -> bool:
        def canon(labels):
            key = lambda iv: (iv.class_name, iv.begin, iv.end)
            return {sid: sorted(ivs, key=key) for sid, ivs in labels.items() if ivs}

        return (isinstance(other, Dataset)
                and sorted(s.id for s in self.sequences) == sorted(s.id for s in other.sequences)
                and all(s == other.sequence(s.id) for s in self.sequences)
                and canon(self.labels) == canon(other.labels)
                and self.class_names == other.class_names)


@dataclass(frozen=True, eq=False)
class GestureModel:
    """Per-time-step one-class models of a warped training set."""

    class_name: str
    per_frame_models: tuple
    reference_id: str
    threshold: float | None = None
    seed: int | None = None

    def __post_init__(self):
        models = tuple(self.per_frame_models)
        if not models:
            raise ValueError("per_frame_models must be non-empty")
        kinds = {type(m) for m in models}
        if kinds == {GmmModel}:
            variant = "gmm"
        elif kinds == {ApeModel}:
            variant = "ape"
        else:
            raise ValueError("per_frame_models must be all-GMM or all-APE")
        dims = {m.dim for m in models}
        if len(dims) != 1:
            raise ValueError("per-frame models disagree on dimension")
        if self.threshold is not None:
            if not (math.isfinite(self.threshold) and self.threshold > 0):
                raise ValueError("threshold must be finite and > 0")
        object.__setattr__(self, "per_frame_models", models)
        object.__setattr__(self, "_variant", variant)

    @property
    def variant(self) -> str:
        return self._variant

    @property
    def model_length(self) -> int:
        return len(self.per_frame_models)

    @property
    def dim(self) -> int:
        return self.per_frame_models[0].dim

    @property
    def max_row_cost(self) -> float:
        """Soft distances never exceed 1, bounding every matrix cell by m."""
        return 1.0

    def row_costs(self, q: np.ndarray) -> np.ndarray:
        """Soft distance of one query frame against every per-frame model."""
        if self.variant == "gmm":
            return np.array([gmm_soft_distance(q, m) for m in self.per_frame_models])
        return np.array([ape_soft_distance(q, m) for m in self.per_frame_models])

    def with_threshold(self, threshold: float) -> "GestureModel":
        return replace(self, threshold=float(threshold))


# --------------------------------------------------------------------------
# sequence / dataset files

def save_sequence(seq: Sequence, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{seq.id}.seq.csv"
    lines = [f"dim={seq.dim}"]
    for frame in seq.frames:
        lines.append(",".join(repr(float(v)) for v in frame))
    path.write_text("\n".join(lines) + "\n")
    sidecar = directory / f"{seq.id}.seq.json"
    if seq.frame_rate is not None:
        sidecar.write_text(_canonical_json({"frame_rate": seq.frame_rate}))
    elif sidecar.exists():
        sidecar.unlink()
    return path


def load_sequence(path) -> Sequence:
    path = Path(path)
    name = path.name
    if not name.endswith(".seq.csv"):
        raise ValueError(f"{path}: sequence files must be named <id>.seq.csv")
    sid = name[: -len(".seq.csv")]
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith("dim="):
        raise ValueError(f"{path}:1: expected header 'dim=<d>'")
    try:
        dim = int(lines[0][4:])
    except ValueError:
        raise ValueError(f"{path}:1: malformed dim header {lines[0]!r}") from None
    if dim < 1:
        raise ValueError(f"{path}:1: dim must be positive")
    frames = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != dim:
            raise ValueError(
                f"{path}:{lineno}: frame {lineno - 1} has {len(parts)} values, expected {dim}")
        try:
            frames.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed number") from None
    if not frames:
        raise ValueError(f"{path}: no frames")
    frame_rate = None
    sidecar = path.with_name(f"{sid}.seq.json")
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        frame_rate = meta.get("frame_rate")
    return Sequence(sid, np.array(frames), frame_rate)


def save_dataset(dataset: Dataset, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for seq in sorted(dataset.sequences, key=lambda s: s.id):
        save_sequence(seq, directory)
    rows = ["sequence_id,class_name,begin,end"]
    for sid in sorted(dataset.labels):
        for iv in sorted(dataset.labels[sid], key=lambda iv: (iv.class_name, iv.begin)):
            rows.append(f"{sid},{iv.class_name},{iv.begin},{iv.end}")
    (directory / "labels.csv").write_text("\n".join(rows) + "\n")
    return directory


def load_dataset(path) -> Dataset:
    """Load every ``*.seq.csv`` plus ``labels.csv`` from a directory."""
    directory = Path(path)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    sequences = [load_sequence(p) for p in sorted(directory.glob("*.seq.csv"))]
    if not sequences:
        raise FileNotFoundError(f"{directory}: no *.seq.csv files")
    labels_path = directory / "labels.csv"
    if not labels_path.exists():
        raise FileNotFoundError(f"missing label file: {labels_path}")
    known = {s.id for s in sequences}
    labels: dict[str, list[LabeledInterval]] = {}
    lines = labels_path.read_text().splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip() or line.startswith("sequence_id,"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{labels_path}:{lineno}: expected 4 fields, got {len(parts)}")
        sid, cls, begin_s, end_s = parts
        if sid not in known:
            raise ValueError(f"{labels_path}:{lineno}: unknown sequence id {sid!r}")
        try:
            begin, end = int(begin_s), int(end_s)
        except ValueError:
            raise ValueError(f"{labels_path}:{lineno}: malformed frame index") from None
        try:
            labels.setdefault(sid, []).append(LabeledInterval(cls, begin, end))
        except ValueError as exc:
            raise ValueError(f"{labels_path}:{lineno}: {exc}") from None
    return Dataset(tuple(sequences), {k: tuple(v) for k, v in labels.items()})


# --------------------------------------------------------------------------
# model files

def _canonical_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _gmm_to_dict(m: GmmModel) -> dict:
    return {
        "weights": m.weights.tolist(),
        "means": m.means.tolist(),
        "covariances": m.covariances.tolist(),
    }


def _gmm_from_dict(d: dict) -> GmmModel:
    return GmmModel(np.array(d["weights"]), np.array(d["means"]),
                    np.array(d["covariances"]))


def _ape_to_dict(m: ApeModel) -> dict:
    return {
        "phi": m.phi,
        "p": m.p,
        "seed": m.seed,
        "hulls": [
            {
                "projection": h.projection.tolist(),
                "vertices": h.vertices.tolist(),
                "vertex_indices": h.vertex_indices.tolist(),
                "center": h.center.tolist(),
                "expanded_vertices": h.expanded_vertices.tolist(),
                "kind": h.kind,
            }
            for h in m.hulls
        ],
    }


def _ape_from_dict(d: dict) -> ApeModel:
    hulls = tuple(
        ProjectedHull(
            np.array(h["projection"]),
            np.array(h["vertices"]),
            np.array(h["vertex_indices"], dtype=int),
            np.array(h["center"]),
            np.array(h["expanded_vertices"]),
            h["kind"],
        )
        for h in d["hulls"]
    )
    return ApeModel(hulls, d["phi"], d["p"], d["seed"])


def save_model(model: GestureModel, path) -> Path:
    path = Path(path)
    if model.variant == "gmm":
        frames = [_gmm_to_dict(m) for m in model.per_frame_models]
    else:
        frames = [_ape_to_dict(m) for m in model.per_frame_models]
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "variant": model.variant,
        "class_name": model.class_name,
        "model_length": model.model_length,
        "dim": model.dim,
        "reference_id": model.reference_id,
        # the reference is sample floor(N/2) of the ascending-length stable
        # sort; recorded so exact model lengths stay auditable
        "reference_rule": "ascending-length-sort[floor(N/2)]",
        "threshold": model.threshold,
        "seed": model.seed,
        "frames": frames,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_canonical_json(payload))
    return path


def load_model(path) -> GestureModel:
    path = Path(path)
    payload = json.loads(path.read_text())
    version = payload.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported model version {version!r}")
    variant = payload["variant"]
    if variant == "gmm":
        models = tuple(_gmm_from_dict(d) for d in payload["frames"])
    elif variant == "ape":
        models = tuple(_ape_from_dict(d) for d in payload["frames"])
    else:
        raise ValueError(f"{path}: unknown model variant {variant!r}")
    model = GestureModel(payload["class_name"], models, payload["reference_id"],
                         payload["threshold"], payload["seed"])
    if model.model_length != payload["model_length"] or model.dim != payload["dim"]:
        raise ValueError(f"{path}: header does not match frame contents")
    return model
