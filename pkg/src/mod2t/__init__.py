"""Motion-state tracking: which tracked objects move relative to the ground.

A detection-based track stream is labelled moving or stationary by combining
camera-compensated displacement, background appearance similarity and a
background-subtraction branch whose reliability is gated per frame.
"""

from mod2t.bgmodel import DualGaussianBackground, extract_blobs, grid_statistics
from mod2t.core import (AffineTransform, BoundingBox, DegenerateInputError, InvalidInputError, Source,
                        TrackRecord, iou, mahalanobis_distance, match_boxes)
from mod2t.fuse import (EffectivenessReport, FusedRecord, FusionWeights, Verdict, assess_effectiveness,
                        compute_box_weights, compute_theta_weights, fuse_frame, motion_pixel_score)
from mod2t.io import ParseError, RunConfig
from mod2t.judge import MotionLabel, MotionStateJudge, MotionVerdict, motion_score, ssim
from mod2t.metrics import MetricReport, evaluate
from mod2t.pipeline import MoD2T, bf_trend
from mod2t.registration import RegistrationConfig, estimate_camera_motion, stabilize_box
from mod2t.synth import Actor, SceneScript, degrade_tracks, render
from mod2t.tradtrack import BlobTracker

__version__ = "0.1.0"

__all__ = [
    "Actor", "AffineTransform", "BlobTracker", "BoundingBox", "DegenerateInputError", "DualGaussianBackground",
    "EffectivenessReport", "FusedRecord", "FusionWeights", "InvalidInputError", "MetricReport", "MoD2T",
    "MotionLabel", "MotionStateJudge", "MotionVerdict", "ParseError", "RegistrationConfig", "RunConfig",
    "SceneScript", "Source", "TrackRecord", "Verdict", "assess_effectiveness", "bf_trend",
    "compute_box_weights", "compute_theta_weights", "degrade_tracks", "estimate_camera_motion",
    "evaluate", "extract_blobs", "fuse_frame", "grid_statistics", "iou", "mahalanobis_distance",
    "match_boxes", "motion_pixel_score", "motion_score", "render", "ssim", "stabilize_box",
]
