"""Approximate convex polytope decision ensembles.

A one-class model built from F random 2-D projections of the training
points: each projection keeps the convex hull of the projected points,
radially displaced about the projected centre by a shrink/expand parameter
phi (the per-vertex displacement is scaled by a quadratic form of the
vertex's original-space preimage, so a single phi maps to per-vertex
amounts in the projected space). Membership of a query is the fraction of
projections whose expanded polygon contains the projected query; the soft
distance is exp(-membership).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence as SequenceABC

import numpy as np

BOUNDARY_TOL = 1e-9

HULL_FULL = "full"
HULL_SEGMENT = "segment"
HULL_POINT = "point"


@dataclass(frozen=True, eq=False)
class Hull2D:
    """2-D convex hull: vertices CCW with no collinear interior vertices.

    ``indices`` maps each vertex back into the input point list. Degenerate
    inputs collapse to ``segment`` (2 endpoints) or ``point`` (1 vertex).
    """

    vertices: np.ndarray
    indices: np.ndarray
    kind: str

    @property
    def degenerate(self) -> bool:
        return self.kind != HULL_FULL


def convex_hull_2d(points) -> Hull2D:
    """Monotone-chain hull of 2-D points, counter-clockwise."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.size == 0:
        raise ValueError("empty point set")
    if pts.shape[1] != 2:
        raise ValueError(f"expected 2-D points, got dimension {pts.shape[1]}")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    uniq: list[int] = []
    for idx in order:
        if not uniq or not np.array_equal(pts[idx], pts[uniq[-1]]):
            uniq.append(int(idx))
    if len(uniq) == 1:
        i = np.array(uniq)
        return Hull2D(pts[i].copy(), i, HULL_POINT)

    def cross(o, a, b):
        return (pts[a, 0] - pts[o, 0]) * (pts[b, 1] - pts[o, 1]) - \
               (pts[a, 1] - pts[o, 1]) * (pts[b, 0] - pts[o, 0])

    def chain(seq):
        out: list[int] = []
        for idx in seq:
            while len(out) >= 2 and cross(out[-2], out[-1], idx) <= 0:
                out.pop()
            out.append(idx)
        return out

    lower = chain(uniq)
    upper = chain(reversed(uniq))
    hull_idx = lower[:-1] + upper[:-1]
    if len(hull_idx) == 2:
        i = np.array(hull_idx[:2])
        return Hull2D(pts[i].copy(), i, HULL_SEGMENT)
    i = np.array(hull_idx)
    return Hull2D(pts[i].copy(), i, HULL_FULL)


def expand_hull(hull_vertices, center_proj, original_vertices, projection,
                center_orig, phi: float) -> np.ndarray:
    """Displace projected hull vertices radially from the projected centre.

    The displacement of vertex i is
        omega_i = ((p_i - c)^T rho^T rho (p_i - c)) / ||p_i - c|| * phi
    computed from the vertex's original-space preimage p_i and centre c,
    clamped so a shrink (phi < 0) never crosses the projected centre.
    phi = 0 returns the vertices unchanged.
    """
    verts = np.asarray(hull_vertices, dtype=float)
    cbar = np.asarray(center_proj, dtype=float)
    orig = np.asarray(original_vertices, dtype=float)
    rho = np.asarray(projection, dtype=float)
    c = np.asarray(center_orig, dtype=float)
    if phi == 0.0:
        return verts.copy()
    gram = rho.T @ rho
    out = np.empty_like(verts)
    for i in range(verts.shape[0]):
        d_orig = orig[i] - c
        norm_orig = float(np.linalg.norm(d_orig))
        d_proj = verts[i] - cbar
        norm_proj = float(np.linalg.norm(d_proj))
        if norm_orig == 0.0 or norm_proj == 0.0:
            raise ValueError("hull vertex coincides with the centre (degenerate)")
        omega = float(d_orig @ gram @ d_orig) / norm_orig * phi
        omega = max(omega, -norm_proj)  # shrink stops at the centre
        out[i] = verts[i] + omega * d_proj / norm_proj
    return out


@dataclass(frozen=True, eq=False)
class ProjectedHull:
    projection: np.ndarray        # (p, d)
    vertices: np.ndarray          # projected hull, CCW
    vertex_indices: np.ndarray    # into the training set
    center: np.ndarray            # projected centre rho @ c
    expanded_vertices: np.ndarray # membership polygon (conv of displaced set)
    kind: str


@dataclass(frozen=True, eq=False)
class ApeModel:
    """F projected hulls plus the shared phi / projection dimension / seed."""

    hulls: tuple[ProjectedHull, ...]
    phi: float
    p: int
    seed: int | None
    # stacked, padded geometry for batched membership tests
    _poly: np.ndarray = field(init=False, repr=False)
    _nvert: np.ndarray = field(init=False, repr=False)
    _projs: np.ndarray = field(init=False, repr=False)
    _kinds: tuple[str, ...] = field(init=False, repr=False)

    def __post_init__(self):
        if not self.hulls:
            raise ValueError("an APE model needs at least one projection")
        vmax = max(h.expanded_vertices.shape[0] for h in self.hulls)
        f = len(self.hulls)
        poly = np.empty((f, vmax, 2))
        nvert = np.empty(f, dtype=int)
        for fi, h in enumerate(self.hulls):
            k = h.expanded_vertices.shape[0]
            poly[fi, :k] = h.expanded_vertices
            poly[fi, k:] = h.expanded_vertices[0]  # pad: zero-length edges
            nvert[fi] = k
        object.__setattr__(self, "_poly", poly)
        object.__setattr__(self, "_nvert", nvert)
        object.__setattr__(self, "_projs",
                           np.stack([h.projection for h in self.hulls]))
        object.__setattr__(self, "_kinds", tuple(h.kind for h in self.hulls))

    @property
    def n_projections(self) -> int:
        return len(self.hulls)

    @property
    def dim(self) -> int:
        return self.hulls[0].projection.shape[1]


def fit_ape(points, n_projections: int, p: int, phi: float, seed,
            projections: SequenceABC[np.ndarray] | None = None) -> ApeModel:
    """Fit an ensemble of F random-projection hulls.

    Projection entries are i.i.d. standard normal from the seeded RNG;
    passing ``projections`` explicitly bypasses the RNG (testing hook).
    Only p = 2 is supported (exact polygon machinery); fewer than p+1
    distinct points per projection degrade gracefully to segment/point
    hulls whose membership test is a distance check.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.size == 0:
        raise ValueError("empty point set")
    if p != 2:
        raise ValueError("only projection dimension p = 2 is supported")
    if n_projections < 1:
        raise ValueError("need at least one projection")
    d = pts.shape[1]
    if projections is None:
        rng = np.random.default_rng(seed)
        mats = [rng.standard_normal((p, d)) for _ in range(n_projections)]
    else:
        mats = [np.asarray(m, dtype=float) for m in projections]
        if len(mats) != n_projections or any(m.shape != (p, d) for m in mats):
            raise ValueError("projections must be n_projections matrices of shape (p, d)")
    center = pts.mean(axis=0)
    hulls = []
    for rho in mats:
        proj_pts = pts @ rho.T
        hull = convex_hull_2d(proj_pts)
        cbar = rho @ center
        if phi != 0.0 and hull.kind != HULL_POINT and \
                np.all(np.linalg.norm(hull.vertices - cbar, axis=1) > 0) and \
                np.all(np.linalg.norm(pts[hull.indices] - center, axis=1) > 0):
            displaced = expand_hull(hull.vertices, cbar, pts[hull.indices],
                                    rho, center, phi)
            rehull = convex_hull_2d(displaced)
            expanded = rehull.vertices
            kind = rehull.kind
        else:
            expanded = hull.vertices.copy()
            kind = hull.kind
        hulls.append(ProjectedHull(rho, hull.vertices, hull.indices, cbar,
                                   expanded, kind))
    seed_val = seed if isinstance(seed, (int, np.integer)) else None
    return ApeModel(tuple(hulls), float(phi), p,
                    int(seed_val) if seed_val is not None else None)


def point_in_convex_polygon(q, vertices, tol: float = BOUNDARY_TOL) -> bool:
    """Boundary-inclusive containment in a CCW convex polygon.

    Inside iff the signed distance to every edge's supporting line is
    >= -tol; degenerate polygons (segment / point) fall back to a distance
    test at the same tolerance.
    """
    q = np.asarray(q, dtype=float)
    verts = np.asarray(vertices, dtype=float)
    k = verts.shape[0]
    if k == 1:
        return bool(np.linalg.norm(q - verts[0]) <= tol)
    if k == 2:
        return _dist_to_segment(q, verts[0], verts[1]) <= tol
    v2 = np.roll(verts, -1, axis=0)
    edge = v2 - verts
    lengths = np.linalg.norm(edge, axis=1)
    rel = q - verts
    cross = edge[:, 0] * rel[:, 1] - edge[:, 1] * rel[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        signed = np.where(lengths > 0, cross / lengths, np.inf)
    return bool(np.min(signed) >= -tol)


def _dist_to_segment(q, a, b) -> float:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.linalg.norm(q - a))
    t = float((q - a) @ ab) / denom
    t = min(1.0, max(0.0, t))
    return float(np.linalg.norm(q - (a + t * ab)))


def ape_membership(q, model: ApeModel) -> float:
    """Fraction of projections whose expanded polygon contains rho_f q."""
    q = np.asarray(q, dtype=float)
    if q.shape != (model.dim,):
        raise ValueError(f"expected a {model.dim}-vector, got shape {q.shape}")
    proj = model._projs @ q  # (F, 2)
    f = model.n_projections
    inside = 0
    full_mask = np.array([k == HULL_FULL for k in model._kinds])
    if full_mask.any():
        inside += int(np.sum(_inside_convex_batch(
            proj[full_mask], model._poly[full_mask], model._nvert[full_mask])))
    for fi in np.nonzero(~full_mask)[0]:
        h = model.hulls[fi]
        if point_in_convex_polygon(proj[fi], h.expanded_vertices):
            inside += 1
    return inside / f


def _inside_convex_batch(qs, polys, nvert) -> np.ndarray:
    """Vectorised boundary-inclusive test, qs (F,2) vs polys (F,Vmax,2)."""
    v2 = np.roll(polys, -1, axis=1)
    edge = v2 - polys
    lengths = np.linalg.norm(edge, axis=2)
    rel = qs[:, None, :] - polys
    cross = edge[:, :, 0] * rel[:, :, 1] - edge[:, :, 1] * rel[:, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        signed = np.where(lengths > 0, cross / lengths, np.inf)
    return np.min(signed, axis=1) >= -BOUNDARY_TOL


def ape_soft_distance(q, model: ApeModel) -> float:
    """exp(-membership): in [1/e, 1]."""
    return float(np.exp(-ape_membership(q, model)))
