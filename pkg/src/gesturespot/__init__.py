"""Temporal-pattern spotting with one-class-classifier DTW.

A streaming begin-end detector whose frame costs come from per-time-step
one-class models (Gaussian mixtures or convex-polytope ensembles over
random projections) of a warped training set, plus the mask-level
behavioural features and the overlap / accuracy / rank-significance
evaluation protocol.
"""

from .align import WarpedClassSet, build_warped_set, select_reference, warp_to_reference
from .ape import (ApeModel, Hull2D, ProjectedHull, ape_membership,
                  ape_soft_distance, convex_hull_2d, expand_hull, fit_ape,
                  point_in_convex_polygon)
from .dtw import (CostMatrix, WarpingPath, backtrack, dtw_align,
                  frame_cost_euclidean, stream_column_update)
from .evaluate import (BinaryTimeline, RankTable, accuracy, count_matched,
                       friedman, friedman_pvalue, iman_davenport, nemenyi_cd,
                       nemenyi_q, overlap, overlap_components, rank_methods)
from .features import (FlowFrame, HeadBoxFrame, MaskFrame,
                       build_feature_sequence, color_name, fhead, finv, fmov,
                       ftorso, load_color_prototypes)
from .gmm import GmmModel, fit_gmm, fit_gmm_em, gmm_membership, gmm_soft_distance
from .pipeline import (METHODS, EvalOutcome, EvalRow, ModelParams,
                       TemplateModel, run_eval)
from .seqmodel import (Dataset, GestureModel, LabeledInterval, Sequence,
                       load_dataset, load_model, load_sequence, save_dataset,
                       save_model, save_sequence)
from .spotting import (CalibrationReport, DetectionResult, calibrate_threshold,
                       spot, spotting_cost)
from .synth import SynthConfig, generate
from .train import train_ape_gesture_model, train_gmm_gesture_model

__version__ = "0.1.0"
