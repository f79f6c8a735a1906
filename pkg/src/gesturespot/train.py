"""Assemble per-frame one-class models into gesture models.

One model per reference time step, fitted on the column of warped training
frames at that step. Each frame gets its own RNG stream derived from the
master seed by frame index, so frames can be fitted independently and the
whole model is reproducible from the recorded seed.
"""

from __future__ import annotations

import numpy as np

from .align import WarpedClassSet
from .ape import fit_ape
from .gmm import fit_gmm
from .seqmodel import GestureModel

DEFAULT_GMM_COMPONENTS = 3
DEFAULT_APE_PROJECTIONS = 25
DEFAULT_APE_DIM = 2
DEFAULT_APE_PHI = 0.0


def _frame_seed(seed: int, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(t,))


def train_gmm_gesture_model(warped: WarpedClassSet, n_components: int = DEFAULT_GMM_COMPONENTS,
                            seed: int = 0, diagonal: bool = False) -> GestureModel:
    """One GMM per reference frame, fit on that frame's column of samples."""
    models = tuple(
        fit_gmm(warped.column(t), n_components, _frame_seed(seed, t), diagonal=diagonal)
        for t in range(warped.length))
    return GestureModel(warped.class_name, models, warped.reference_id, seed=seed)


def train_ape_gesture_model(warped: WarpedClassSet, n_projections: int = DEFAULT_APE_PROJECTIONS,
                            p: int = DEFAULT_APE_DIM, phi: float = DEFAULT_APE_PHI,
                            seed: int = 0) -> GestureModel:
    """One convex-polytope ensemble per reference frame."""
    models = tuple(
        fit_ape(warped.column(t), n_projections, p, phi, _frame_seed(seed, t))
        for t in range(warped.length))
    return GestureModel(warped.class_name, models, warped.reference_id, seed=seed)
