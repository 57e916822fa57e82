"""End-to-end flow: both branches, effectiveness gate, motion judgment, fusion."""

from collections import defaultdict
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator

from mod2t.bgmodel import DualGaussianBackground
from mod2t.core import AffineTransform, DegenerateInputError, InvalidInputError
from mod2t.fuse import (FusionWeights, assess_effectiveness, compute_box_weights,
                        compute_theta_weights, fuse_frame, traditional_mvf1)
from mod2t.io import RunConfig
from mod2t.judge import MotionStateJudge
from mod2t.metrics import evaluate
from mod2t.registration import RegistrationConfig, estimate_camera_motion
from mod2t.synth import degrade_tracks
from mod2t.tradtrack import BlobTracker
from mod2t.validation import check_gray_image


def estimate_warps(frames, cfg: RunConfig = None):
    """``warps[i]`` maps frame ``i - 1`` into frame ``i`` (0-based); ``warps[0]`` is identity."""
    cfg = cfg or RunConfig()
    reg = RegistrationConfig(cfg.pyramid_levels, cfg.max_iterations, cfg.convergence_eps, cfg.motion_model)
    warps = [AffineTransform.identity()]
    for prev, curr in zip(frames[:-1], frames[1:]):
        warps.append(estimate_camera_motion(prev, curr, reg))
    return warps


def fusion_weights(cfg: RunConfig) -> FusionWeights:
    """Box and stillness weights from the configured priors.

    Without a prior MOTA for the background branch, it is credited with the
    deep branch's MOTA, which makes the box weights depend on ``alpha`` alone.
    """
    mota_tra = cfg.mota_deep if cfg.prior_mota is None else max(cfg.prior_mota, 0.0)
    try:
        box_deep, box_tra = compute_box_weights(mota_tra, cfg.mota_deep, cfg.alpha)
    except DegenerateInputError:
        box_deep, box_tra = 1.0, 0.0
    mvf1_tra = cfg.mvf1_tra if cfg.mvf1_tra is not None else traditional_mvf1(cfg.prior_mota)
    theta_deep, theta_tra = compute_theta_weights(mvf1_tra, cfg.mvf1_deep)
    return FusionWeights(box_deep, box_tra, theta_deep, theta_tra)


def _group(records):
    out = defaultdict(list)
    for r in records:
        out[r.frame].append(r)
    return out


@dataclass
class PipelineTrace:
    """Intermediate products of one run, kept for inspection and the CLI."""

    warps: List[AffineTransform]
    masks: List[np.ndarray]
    tra_tracks: list
    verdicts: dict
    reports: list
    weights: FusionWeights


class MoD2T(BaseEstimator):
    """Motion-state labelling of deep-branch tracks, fused with a background-subtraction branch.

    Parameters
    ----------
    config : RunConfig or None
        All tunables; None uses the defaults.
    estimate_motion : bool, default=True
        Register consecutive frames. False assumes a static camera.

    Attributes
    ----------
    trace_ : PipelineTrace
    """

    def __init__(self, config: Optional[RunConfig] = None, estimate_motion=True):
        self.config = config
        self.estimate_motion = estimate_motion

    def _cfg(self):
        return (self.config or RunConfig()).validate()

    def fit(self, frames, deep_tracks=None):
        """Run both branches over ``frames``; keeps everything needed by :meth:`predict`."""
        cfg = self._cfg()
        frames = [np.asarray(f) for f in frames]
        if not frames:
            raise InvalidInputError("no frames")
        shape = frames[0].shape
        for k, f in enumerate(frames, 1):
            check_gray_image(f, f"frame {k}")
            if f.shape != shape:
                raise InvalidInputError(f"frame {k} has shape {f.shape}, expected {shape}")
        warps = estimate_warps(frames, cfg) if self.estimate_motion else [AffineTransform.identity()] * len(frames)

        bg = DualGaussianBackground(cfg.grid_cell, cfg.theta_s, cfg.theta_d, cfg.theta_v, cfg.decay,
                                    cfg.min_blob_area, cfg.variance_floor)
        masks = bg.fit_transform(frames, warps)
        tracker = BlobTracker(cfg.tracker_iou_gate, cfg.max_age, cfg.min_hits).reset()
        tra = []
        for m in masks:
            tra.extend(tracker.update(bg.blobs(m)))

        judge = MotionStateJudge(cfg.frame_gap, cfg.lam, cfg.beta_d, cfg.threshold,
                                 (cfg.patch_height, cfg.patch_width), cfg.boundary_margin,
                                 cfg.r1, cfg.r2, cfg.distance_units).fit(frames, warps)
        self.frames_ = frames
        self.judge_ = judge
        self.trace_ = PipelineTrace(warps, masks, tra, {}, [], fusion_weights(cfg))
        if deep_tracks is not None:
            self.deep_tracks_ = list(deep_tracks)
        return self

    def predict(self, deep_tracks=None):
        """Fused records, one per deep-branch record, in (frame, id) order."""
        if not hasattr(self, "trace_"):
            raise InvalidInputError("MoD2T is not fitted")
        cfg = self._cfg()
        deep = list(deep_tracks) if deep_tracks is not None else getattr(self, "deep_tracks_", None)
        if deep is None:
            raise InvalidInputError("no deep-branch tracks given")
        n = len(self.frames_)
        for r in deep:
            if r.frame > n:
                raise InvalidInputError(f"track {r.track_id} refers to frame {r.frame} beyond the {n} frames")
        tr = self.trace_
        verdicts = self.judge_.predict(deep)
        deep_by, tra_by = _group(deep), _group(tr.tra_tracks)
        out, reports = [], []
        for t in range(1, n + 1):
            mask = tr.masks[t - 1]
            tra_t = sorted(tra_by.get(t, []), key=lambda r: r.track_id)
            report = assess_effectiveness(mask, [r.box for r in tra_t], cfg.prior_mota,
                                          cfg.min_component_fraction)
            reports.append(report)
            if t in deep_by:
                out.extend(fuse_frame(deep_by[t], tra_t, mask, report, tr.weights, verdicts,
                                      cfg.R, cfg.threshold, cfg.fusion_iou_gate))
        tr.verdicts = verdicts
        tr.reports = reports
        return out

    def fit_predict(self, frames, deep_tracks):
        return self.fit(frames).predict(deep_tracks)


def labels_of(fused):
    """``(frame, id) -> 1 | 0 | -1`` for metric evaluation."""
    return {(r.frame, r.track_id): r.label.code for r in fused}


def bf_trend(gt, gt_motion, fractions=(0.0, 0.2, 0.4, 0.6), seed=0, iou_thresh=0.5,
             pred=None, pred_labels=None):
    """Delete whole identities from a prediction and score MVF1 three ways.

    Returns rows ``(fraction, mota, mvf1_adaptive, mvf1_bf0, mvf1_bf1)``.
    Without ``pred`` the ground truth itself, carrying the annotated labels,
    is the prediction, so only detection quality varies along the curve.
    The same seed removes nested identity sets as the fraction grows.
    """
    if pred is None:
        pred, pred_labels = gt, gt_motion
    elif pred_labels is None:
        raise InvalidInputError("pred_labels are required with pred")
    rows = []
    for f in fractions:
        kept = degrade_tracks(pred, f, 0.0, seed)
        labels = {(r.frame, r.track_id): pred_labels.get((r.frame, r.track_id), -1) for r in kept}
        adaptive = evaluate(kept, labels, gt, gt_motion, iou_thresh, "adaptive")
        bf0 = evaluate(kept, labels, gt, gt_motion, iou_thresh, 0.0)
        bf1 = evaluate(kept, labels, gt, gt_motion, iou_thresh, 1.0)
        rows.append((float(f), adaptive.mota, adaptive.mvf1, bf0.mvf1, bf1.mvf1))
    return rows


def format_bf_trend(rows):
    lines = ["fraction,mota,mvf1_adaptive,mvf1_bf0,mvf1_bf1"]
    lines += [",".join(f"{v:.6f}" for v in row) for row in rows]
    return "\n".join(lines) + "\n"
