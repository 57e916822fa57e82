"""Per-object motion-state judgment for tracks from the detection-based branch.

A track is scored at frame ``t`` against its own box at ``t - frame_gap``:

* displacement score -- the older box is carried into frame ``t`` by the
  estimated camera motion, its center displacement is measured and mapped
  linearly from 1 (no motion) down to 0 (``beta_d`` or more);
* appearance score -- SSIM between the background strips around the box in
  the two frames;

and the stillness score ``theta = lam * appearance + (1 - lam) * displacement``
labels the object stationary when it exceeds ``threshold``.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

import cv2
import numpy as np
from sklearn.base import BaseEstimator

from mod2t.core import AffineTransform, BoundingBox, InvalidInputError, mahalanobis_distance
from mod2t.registration import chain, stabilize_box
from mod2t.validation import check_gray_image, check_interval, check_positive_int

STRIP_ORDER = ("above", "below", "left", "right")
# 8-bit SSIM stabilizers (0.01 * 255)^2 and (0.03 * 255)^2
DEFAULT_R1 = 6.5025
DEFAULT_R2 = 58.5225


class MotionLabel(str, enum.Enum):
    MOVING = "moving"
    STATIONARY = "stationary"
    UNKNOWN = "unknown"

    @property
    def code(self):
        return {"moving": 1, "stationary": 0, "unknown": -1}[self.value]

    @classmethod
    def from_code(cls, code):
        return {1: cls.MOVING, 0: cls.STATIONARY, -1: cls.UNKNOWN}[int(code)]


@dataclass(frozen=True)
class BackgroundPatch:
    """Four background strips resized to a common size, stacked above/below/left/right.

    ``data`` has shape ``(4, height, width)``; invalid strips are zero.
    """

    data: np.ndarray
    valid: tuple

    @property
    def empty(self):
        return not any(self.valid)


@dataclass(frozen=True)
class MotionVerdict:
    theta: Optional[float]
    a_a: Optional[float]
    a_m: Optional[float]
    label: MotionLabel

    @classmethod
    def unknown(cls):
        return cls(None, None, None, MotionLabel.UNKNOWN)


def _strip_bounds(box, frame_shape):
    """Unclipped (x0, y0, x1, y1) of each strip; thickness equals the box extent."""
    x0, y0 = box.x, box.y
    x1, y1 = box.x + box.w, box.y + box.h
    return {
        "above": (x0, y0 - box.h, x1, y0),
        "below": (x0, y1, x1, y1 + box.h),
        "left": (x0 - box.w, y0, x0, y1),
        "right": (x1, y0, x1 + box.w, y1),
    }


def _outer_margin(name, bounds, frame_shape):
    h, w = frame_shape
    x0, y0, x1, y1 = bounds
    return {"above": y0, "below": h - y1, "left": x0, "right": w - x1}[name]


def extract_background_patch(frame, box: BoundingBox, patch_size=(256, 192), boundary_margin=15):
    """Crop and resize the background surrounding ``box``.

    A strip is dropped when its outer edge comes within ``boundary_margin``
    pixels of the image border (or lies outside the image). ``patch_size`` is
    ``(height, width)`` of every resized strip.
    """
    img = check_gray_image(frame, "frame")
    ph, pw = patch_size
    data = np.zeros((4, ph, pw), dtype=np.float64)
    valid = []
    for k, name in enumerate(STRIP_ORDER):
        bounds = _strip_bounds(box, img.shape)[name]
        if _outer_margin(name, bounds, img.shape) < boundary_margin:
            valid.append(False)
            continue
        x0, y0, x1, y1 = bounds
        c0 = max(int(math.floor(x0)), 0)
        r0 = max(int(math.floor(y0)), 0)
        c1 = min(int(math.ceil(x1)), img.shape[1])
        r1 = min(int(math.ceil(y1)), img.shape[0])
        if c1 <= c0 or r1 <= r0:
            valid.append(False)
            continue
        data[k] = cv2.resize(img[r0:r1, c0:c1], (pw, ph), interpolation=cv2.INTER_LINEAR)
        valid.append(True)
    return BackgroundPatch(data, tuple(valid))


def ssim_global(x, y, r1=DEFAULT_R1, r2=DEFAULT_R2):
    """Single-window SSIM over two equally shaped arrays (population moments)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    mx, my = x.mean(), y.mean()
    vx = ((x - mx) ** 2).mean()
    vy = ((y - my) ** 2).mean()
    cov = ((x - mx) * (y - my)).mean()
    return ((2 * mx * my + r1) * (2 * cov + r2)) / ((mx * mx + my * my + r1) * (vx + vy + r2))


def ssim(p1: BackgroundPatch, p2: BackgroundPatch, r1=DEFAULT_R1, r2=DEFAULT_R2):
    """Appearance similarity of two patches over their commonly valid strips.

    Returns None when no strip is valid in both.
    """
    common = [k for k in range(4) if p1.valid[k] and p2.valid[k]]
    if not common:
        return None
    return float(ssim_global(p1.data[common], p2.data[common], r1, r2))


def motion_score(d, beta_d):
    """1 at zero displacement, falling linearly to 0 at ``beta_d`` and beyond."""
    if not beta_d > 0:
        raise InvalidInputError("beta_d must be positive")
    if d < 0:
        raise InvalidInputError("displacement must be non-negative")
    return 1.0 - d / beta_d if d <= beta_d else 0.0


def theta_score(a_a, a_m, lam):
    """Mix appearance and displacement evidence; without appearance, displacement alone."""
    if a_a is None:
        return a_m
    return lam * a_a + (1.0 - lam) * a_m


def displacement(old_box, new_box, units="pixels"):
    """Distance between the boxes' centers, ``old_box`` giving the covariance.

    In ``pixels`` mode the covariance-scaled distance is multiplied back by the
    geometric mean of the old box's half extents, so it equals the Euclidean
    center shift for square boxes and stays comparable to a pixel threshold.
    """
    d = mahalanobis_distance(old_box, new_box)
    if units == "mahalanobis":
        return d
    if units == "pixels":
        return d * math.sqrt(old_box.w * old_box.h) / 2.0
    raise InvalidInputError(f"unknown distance units {units!r}")


class MotionStateJudge(BaseEstimator):
    """Label tracked objects as moving or stationary relative to the ground.

    Parameters
    ----------
    frame_gap : int, default=3
    lam : float, default=0.3
        Weight of background similarity against displacement.
    beta_d : float or None, default=None
        Largest displacement (pixels) a stationary object may show over
        ``frame_gap`` frames. None means ``0.01 * min(width, height)`` of the
        video, resolved in :meth:`fit`.
    threshold : float, default=0.5
        Stillness scores above it mean stationary.
    patch_size : tuple, default=(256, 192)
        (height, width) each background strip is resized to.
    boundary_margin : int, default=15
    r1, r2 : float
        SSIM stabilizers.
    distance_units : {"pixels", "mahalanobis"}, default="pixels"
        Scale in which displacement is compared with ``beta_d``.
    """

    def __init__(self, frame_gap=3, lam=0.3, beta_d=None, threshold=0.5, patch_size=(256, 192),
                 boundary_margin=15, r1=DEFAULT_R1, r2=DEFAULT_R2, distance_units="pixels"):
        self.frame_gap = frame_gap
        self.lam = lam
        self.beta_d = beta_d
        self.threshold = threshold
        self.patch_size = patch_size
        self.boundary_margin = boundary_margin
        self.r1 = r1
        self.r2 = r2
        self.distance_units = distance_units

    def _validate_params(self):
        check_positive_int(self.frame_gap, "frame_gap")
        check_interval(self.lam, "lam", 0.0, 1.0)
        if self.beta_d is not None:
            check_interval(self.beta_d, "beta_d", 0.0, np.inf, (False, False))
        check_interval(self.threshold, "threshold", 0.0, 1.0, (False, False))
        check_interval(self.r1, "r1", 0.0, np.inf, (False, False))
        check_interval(self.r2, "r2", 0.0, np.inf, (False, False))
        if self.distance_units not in ("pixels", "mahalanobis"):
            raise InvalidInputError(f"unknown distance units {self.distance_units!r}")

    def fit(self, frames, warps=None):
        """Bind the video: frames (list of 2-D arrays) and per-frame camera motion.

        ``warps[k]`` maps frame ``k`` (0-based, i.e. frame number ``k``) into
        frame ``k + 1``; frame numbers are 1-based. Missing warps mean a
        static camera.
        """
        self._validate_params()
        if len(frames) == 0:
            raise InvalidInputError("no frames")
        shape = np.asarray(frames[0]).shape
        self.frames_ = frames
        self.shape_ = shape
        n = len(frames)
        if warps is None:
            warps = [AffineTransform.identity()] * n
        if len(warps) != n:
            raise InvalidInputError("need one warp per frame")
        self.warps_ = list(warps)
        self.beta_d_ = self.beta_d if self.beta_d is not None else 0.01 * min(shape)
        self._patches = {}
        return self

    def _patch(self, t, box):
        key = (t, box.x, box.y, box.w, box.h)
        if key not in self._patches:
            self._patches[key] = extract_background_patch(
                self.frames_[t - 1], box, self.patch_size, self.boundary_margin)
        return self._patches[key]

    def camera_motion(self, t_from, t_to):
        """Accumulated transform from frame ``t_from`` into frame ``t_to`` (1-based)."""
        return chain(self.warps_[t] for t in range(t_from, t_to))

    def judge(self, t, box_now, box_then):
        """Verdict for one object seen as ``box_now`` at ``t`` and ``box_then`` at ``t - frame_gap``."""
        if box_then is None or t - self.frame_gap < 1:
            return MotionVerdict.unknown()
        warp = self.camera_motion(t - self.frame_gap, t)
        carried = stabilize_box(box_then, warp)
        d = displacement(carried, box_now, self.distance_units)
        a_m = motion_score(d, self.beta_d_)
        p_now = self._patch(t, box_now)
        p_then = self._patch(t - self.frame_gap, box_then)
        a_a = ssim(p_now, p_then, self.r1, self.r2)
        if a_a is not None:
            a_a = min(max(a_a, 0.0), 1.0)
        theta = theta_score(a_a, a_m, self.lam)
        label = MotionLabel.STATIONARY if theta > self.threshold else MotionLabel.MOVING
        return MotionVerdict(theta, a_a, a_m, label)

    def predict(self, tracks):
        """Verdict for every record in ``tracks`` keyed by ``(frame, track_id)``."""
        if not hasattr(self, "frames_"):
            raise InvalidInputError("MotionStateJudge is not fitted; call fit(frames, warps) first")
        by_key = {(r.frame, r.track_id): r.box for r in tracks}
        out = {}
        for (t, tid), box in sorted(by_key.items()):
            out[(t, tid)] = self.judge(t, box, by_key.get((t - self.frame_gap, tid)))
        return out


def judge_track(history, frames, warps, **params):
    """Verdict for the last entry of one track's ``history`` (list of (frame, box))."""
    judge = MotionStateJudge(**params).fit(frames, warps)
    boxes = dict(history)
    t = max(boxes)
    return judge.judge(t, boxes[t], boxes.get(t - judge.frame_gap))
