"""Mask-level behavioural features.

Four per-frame extractors computed from precomputed inputs (segmentation
masks, optical-flow fields, head boxes with colour-name labels):

* head-grid colour descriptor: modal colour-name label per cell of an
  OxO grid over the head box;
* torso vertical extent: uppermost mask pixel to the lowermost pixel in
  the same column;
* desk invasion: minimum pixel distance between the subject's mask and
  any neighbour's mask;
* movement: mean flow magnitude over the subject's mask.

Image coordinates are raster-style: origin top-left, y grows downward, so
"uppermost" means minimum y. Upstream vision (segmentation, flow, head
tracking, colour-name learning) is out of scope; files are consumed as-is.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .seqmodel import Sequence

N_COLOR_NAMES = 11
COLOR_NAMES = ("red", "orange", "brown", "yellow", "green", "blue",
               "purple", "pink", "white", "grey", "black")
DEFAULT_GRID = (4, 4)

FEATURE_NAMES = ("fhead", "ftorso", "finv", "fmov")


@dataclass(frozen=True, eq=False)
class MaskFrame:
    """Per-subject pixel masks over a width x height frame.

    ``table_line`` optionally marks the desk edge (a y row) for users who
    want a distance-to-desk torso feature instead of the vertical-extent
    one; the built-in extractor does not consume it.
    """

    width: int
    height: int
    subject_masks: dict[int, np.ndarray]  # subject id -> (k, 2) int (x, y)
    table_line: int | None = None

    def __post_init__(self):
        masks = {}
        seen: np.ndarray | None = None
        for sid, px in self.subject_masks.items():
            arr = np.asarray(px, dtype=int)
            if arr.size == 0:
                arr = arr.reshape(0, 2)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise ValueError(f"subject {sid}: mask must be (k, 2) pixel coordinates")
            if arr.size and (arr.min() < 0 or arr[:, 0].max() >= self.width
                             or arr[:, 1].max() >= self.height):
                raise ValueError(f"subject {sid}: mask pixels out of bounds")
            arr.flags.writeable = False
            masks[sid] = arr
        all_px = [tuple(p) for m in masks.values() for p in m]
        if len(all_px) != len(set(all_px)):
            warnings.warn("subject masks overlap", stacklevel=2)
        object.__setattr__(self, "subject_masks", masks)

    def mask(self, subject: int) -> np.ndarray:
        try:
            px = self.subject_masks[subject]
        except KeyError:
            raise ValueError(f"unknown subject {subject}") from None
        return px


@dataclass(frozen=True, eq=False)
class FlowFrame:
    """Dense (u, v) flow over the frame grid, arrays shaped (height, width)."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.shape != v.shape or u.ndim != 2:
            raise ValueError("u and v must share a 2-D shape")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("flow values must be finite")
        for name, arr in (("u", u), ("v", v)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


@dataclass(frozen=True, eq=False)
class HeadBoxFrame:
    """Head bounding box plus per-pixel colour-name labels over the box."""

    box: tuple[int, int, int, int]  # x, y, w, h
    labels: np.ndarray              # (h, w) ints in 1..N_COLOR_NAMES

    def __post_init__(self):
        x, y, w, h = self.box
        if x < 0 or y < 0 or w < 1 or h < 1:
            raise ValueError(f"invalid head box {self.box}")
        arr = np.asarray(self.labels, dtype=int)
        if arr.shape != (h, w):
            raise ValueError(f"labels shape {arr.shape} does not match box {w}x{h}")
        if arr.min() < 1 or arr.max() > N_COLOR_NAMES:
            raise ValueError(f"colour labels must lie in 1..{N_COLOR_NAMES}")
        arr.flags.writeable = False
        object.__setattr__(self, "labels", arr)


def load_color_prototypes(path=None) -> np.ndarray:
    """RGB prototypes for the 11 basic colour names, (11, 3) in 0..255."""
    if path is None:
        text = resources.files("gesturespot").joinpath("data/color_names.json").read_text()
    else:
        text = Path(path).read_text()
    table = json.loads(text)
    missing = [n for n in COLOR_NAMES if n not in table]
    if missing:
        raise ValueError(f"colour prototype file lacks entries for {missing}")
    return np.array([table[n] for n in COLOR_NAMES], dtype=float)


def color_name(rgb, prototypes: np.ndarray | None = None) -> int:
    """Nearest-prototype colour label in 1..11 for an RGB pixel."""
    if prototypes is None:
        prototypes = load_color_prototypes()
    rgb = np.asarray(rgb, dtype=float)
    d2 = np.sum((prototypes - rgb) ** 2, axis=1)
    return int(np.argmin(d2)) + 1


def fhead(frame: HeadBoxFrame, grid: tuple[int, int] = DEFAULT_GRID) -> np.ndarray:
    """Modal colour label per grid cell over the head box.

    The box splits into grid[0] x grid[1] near-equal cells; remainder
    pixels go to the last row/column. Ties pick the smallest label.
    """
    rows, cols = grid
    if rows < 1 or cols < 1:
        raise ValueError("grid dims must be >= 1")
    labels = frame.labels
    h, w = labels.shape
    out = np.empty((rows, cols), dtype=int)
    rstep, cstep = h // rows, w // cols
    if rstep == 0 or cstep == 0:
        raise ValueError(f"box {w}x{h} too small for a {rows}x{cols} grid")
    for i in range(rows):
        r0 = i * rstep
        r1 = (i + 1) * rstep if i < rows - 1 else h
        for j in range(cols):
            c0 = j * cstep
            c1 = (j + 1) * cstep if j < cols - 1 else w
            counts = np.bincount(labels[r0:r1, c0:c1].ravel(),
                                 minlength=N_COLOR_NAMES + 1)
            out[i, j] = int(np.argmax(counts[1:])) + 1
    return out


def ftorso(frame: MaskFrame, subject: int) -> float:
    """Vertical extent: uppermost mask pixel to the lowermost in its column."""
    px = frame.mask(subject)
    if px.shape[0] == 0:
        raise ValueError(f"subject {subject}: empty mask")
    ymin = int(px[:, 1].min())
    x_top = int(px[px[:, 1] == ymin, 0].min())
    y_bot = int(px[px[:, 0] == x_top, 1].max())
    return float(y_bot - ymin)


def finv(frame: MaskFrame, subject: int, neighbours) -> float:
    """Minimum pixel distance from the subject's mask to any neighbour's.

    Returns +inf (with a warning) when no neighbour has pixels; callers
    treating the sentinel as a feature value should clamp it themselves.
    """
    subj = frame.mask(subject)
    if subj.shape[0] == 0:
        raise ValueError(f"subject {subject}: empty mask")
    neigh_px = [frame.mask(ne) for ne in neighbours]
    neigh_px = [p for p in neigh_px if p.shape[0] > 0]
    if not neigh_px:
        warnings.warn("no neighbour pixels; returning +inf sentinel", stacklevel=2)
        return math.inf
    best = math.inf
    a = subj.astype(float)
    for p in neigh_px:
        b = p.astype(float)
        d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
        best = min(best, float(np.sqrt(d2.min())))
    return best


def fmov(frame: MaskFrame, flow: FlowFrame, subject: int) -> float:
    """Mean flow magnitude over the subject's mask pixels."""
    px = frame.mask(subject)
    if px.shape[0] == 0:
        raise ValueError(f"subject {subject}: empty mask")
    h, w = flow.u.shape
    if w != frame.width or h != frame.height:
        raise ValueError("flow field does not cover the frame")
    u = flow.u[px[:, 1], px[:, 0]]
    v = flow.v[px[:, 1], px[:, 0]]
    return float(np.mean(np.sqrt(u * u + v * v)))


def build_feature_sequence(seq_id: str, recipe, *, masks=None, flows=None,
                           headboxes=None, subject: int | None = None,
                           neighbours=(), grid: tuple[int, int] = DEFAULT_GRID,
                           one_hot_fhead: bool = False,
                           frame_rate: float | None = None) -> Sequence:
    """Concatenate per-frame features into the vectors the aligner consumes.

    The head-grid feature is categorical; by default each cell enters the
    vector as label/11 in (0, 1], or one-hot per cell (dim grid*11) with
    ``one_hot_fhead``. The other features contribute one component each.
    """
    recipe = list(recipe)
    if not recipe:
        raise ValueError("empty recipe")
    unknown = [r for r in recipe if r not in FEATURE_NAMES]
    if unknown:
        raise ValueError(f"unknown features {unknown}; choose from {FEATURE_NAMES}")
    needs = {"ftorso": masks, "finv": masks, "fmov": masks, "fhead": headboxes}
    for r in recipe:
        if needs[r] is None:
            raise ValueError(f"feature {r!r} requires {'headboxes' if r == 'fhead' else 'masks'}")
    if "fmov" in recipe and flows is None:
        raise ValueError("feature 'fmov' requires flows")
    if any(r in recipe for r in ("ftorso", "finv", "fmov")) and subject is None:
        raise ValueError("mask features require a subject id")
    if "finv" in recipe and not neighbours:
        raise ValueError("feature 'finv' requires neighbour ids")

    lengths = {len(x) for x in (masks, flows, headboxes) if x is not None}
    if len(lengths) != 1:
        raise ValueError(f"per-frame inputs disagree on frame count: {sorted(lengths)}")
    n = lengths.pop()

    rows = []
    for t in range(n):
        parts = []
        for r in recipe:
            if r == "ftorso":
                parts.append([ftorso(masks[t], subject)])
            elif r == "finv":
                parts.append([finv(masks[t], subject, neighbours)])
            elif r == "fmov":
                parts.append([fmov(masks[t], flows[t], subject)])
            else:
                cells = fhead(headboxes[t], grid).ravel()
                if one_hot_fhead:
                    onehot = np.zeros((cells.size, N_COLOR_NAMES))
                    onehot[np.arange(cells.size), cells - 1] = 1.0
                    parts.append(onehot.ravel())
                else:
                    parts.append(cells / N_COLOR_NAMES)
        rows.append(np.concatenate(parts))
    return Sequence(seq_id, np.array(rows), frame_rate)


# --------------------------------------------------------------------------
# file formats

def read_mask_pgm(path) -> MaskFrame:
    """P2 text grid, one subject label per pixel, 0 = background."""
    tokens = _pgm_tokens(path)
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: expected a P2 text PGM")
    w, h, _maxval = (int(t) for t in tokens[1:4])
    vals = np.array([int(t) for t in tokens[4:]], dtype=int)
    if vals.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, got {vals.size}")
    grid = vals.reshape(h, w)
    masks = {}
    for sid in np.unique(grid):
        if sid == 0:
            continue
        ys, xs = np.nonzero(grid == sid)
        masks[int(sid)] = np.stack([xs, ys], axis=1)
    return MaskFrame(w, h, masks)


def write_mask_pgm(frame: MaskFrame, path) -> None:
    grid = np.zeros((frame.height, frame.width), dtype=int)
    for sid, px in frame.subject_masks.items():
        grid[px[:, 1], px[:, 0]] = sid
    lines = ["P2", f"{frame.width} {frame.height}", str(max(1, int(grid.max())))]
    lines += [" ".join(str(v) for v in row) for row in grid]
    Path(path).write_text("\n".join(lines) + "\n")


def _pgm_tokens(path) -> list[str]:
    out = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        out.extend(line.split())
    return out


def read_flow_csv(path) -> FlowFrame:
    """First line ``height,width``, then h*w rows of ``u,v`` row-major."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty flow file")
    h, w = (int(t) for t in lines[0].split(","))
    uv = np.array([[float(a) for a in line.split(",")] for line in lines[1:] if line.strip()])
    if uv.shape != (h * w, 2):
        raise ValueError(f"{path}: expected {h * w} u,v rows, got {uv.shape[0]}")
    return FlowFrame(uv[:, 0].reshape(h, w), uv[:, 1].reshape(h, w))


def write_flow_csv(flow: FlowFrame, path) -> None:
    h, w = flow.u.shape
    lines = [f"{h},{w}"]
    lines += [f"{repr(float(u))},{repr(float(v))}"
              for u, v in zip(flow.u.ravel(), flow.v.ravel())]
    Path(path).write_text("\n".join(lines) + "\n")


def read_headbox_csv(path) -> HeadBoxFrame:
    """First line ``x,y,w,h``, then h rows of w comma-separated labels."""
    lines = [l for l in Path(path).read_text().splitlines() if l.strip()]
    if not lines:
        raise ValueError(f"{path}: empty head-box file")
    x, y, w, h = (int(t) for t in lines[0].split(","))
    rows = [[int(t) for t in line.split(",")] for line in lines[1:]]
    labels = np.array(rows, dtype=int)
    if labels.shape != (h, w):
        raise ValueError(f"{path}: expected {h} rows of {w} labels, got {labels.shape}")
    return HeadBoxFrame((x, y, w, h), labels)


def write_headbox_csv(frame: HeadBoxFrame, path) -> None:
    x, y, w, h = frame.box
    lines = [f"{x},{y},{w},{h}"]
    lines += [",".join(str(v) for v in row) for row in frame.labels]
    Path(path).write_text("\n".join(lines) + "\n")
