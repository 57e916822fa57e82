"""Fusion of the detection-based and background-subtraction branches."""

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import cv2
import numpy as np

from mod2t.core import BoundingBox, DegenerateInputError, InvalidInputError, Source, TrackRecord, match_boxes
from mod2t.judge import MotionLabel
from mod2t.validation import check_interval, check_mask

MOTA_GATE = 0.25
FG_RATIO_GATE = 0.5
MVF1_TRA_GOOD = 1.0
MVF1_TRA_POOR = 0.2


class Verdict(str, enum.Enum):
    EFFECTIVE = "effective"
    INEFFECTIVE = "ineffective"


@dataclass
class EffectivenessReport:
    """Whether the background-subtraction branch can be trusted in one frame.

    ``mota_gate_passed`` is None when no prior MOTA is known.
    """

    mota_gate_passed: Optional[bool]
    fg_ratio: float
    component_counts: List[int] = field(default_factory=list)
    box_verdicts: List[Verdict] = field(default_factory=list)

    @property
    def fg_gate_passed(self):
        return self.fg_ratio <= FG_RATIO_GATE

    @property
    def verdict(self):
        if self.mota_gate_passed is False or not self.fg_gate_passed:
            return Verdict.INEFFECTIVE
        return Verdict.EFFECTIVE

    @property
    def effective(self):
        return self.verdict is Verdict.EFFECTIVE


@dataclass(frozen=True)
class FusionWeights:
    box_deep: float = 0.5
    box_tra: float = 0.5
    theta_deep: float = 0.5
    theta_tra: float = 0.5

    def __post_init__(self):
        for name in ("box_deep", "box_tra", "theta_deep", "theta_tra"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"weight {name} is negative")
        for a, b in (("box_deep", "box_tra"), ("theta_deep", "theta_tra")):
            if abs(getattr(self, a) + getattr(self, b) - 1.0) > 1e-9:
                raise InvalidInputError(f"{a} and {b} must sum to 1")


@dataclass(frozen=True)
class FusedRecord:
    frame: int
    track_id: int
    box: BoundingBox
    theta: Optional[float]
    label: MotionLabel

    def as_track_record(self):
        return TrackRecord(self.frame, self.track_id, self.box, Source.FUSED)


def count_components(mask_patch, min_pixels):
    """Number of 8-connected components holding more than ``min_pixels`` pixels."""
    m = np.ascontiguousarray(mask_patch, dtype=np.uint8)
    if m.size == 0 or not m.any():
        return 0
    n, _, stats, _ = cv2.connectedComponentsWithStats(m, connectivity=8)
    return int(np.sum(stats[1:n, cv2.CC_STAT_AREA] > min_pixels))


def _box_slice(box, shape):
    h, w = shape
    c0 = min(max(int(np.floor(box.x)), 0), w)
    r0 = min(max(int(np.floor(box.y)), 0), h)
    c1 = min(max(int(np.ceil(box.x + box.w)), 0), w)
    r1 = min(max(int(np.ceil(box.y + box.h)), 0), h)
    return slice(r0, r1), slice(c0, c1)


def assess_effectiveness(mask, tra_boxes, prior_mota=None, min_area_fraction=0.2) -> EffectivenessReport:
    """Frame-level gates plus the per-box connected-component check.

    A box is ineffective when two or more components inside it each exceed
    ``min_area_fraction`` of the box area, the signature of two nearby
    objects merged into one detection.
    """
    m = check_mask(mask)
    fg_ratio = float(m.mean()) if m.size else 0.0
    gate = None if prior_mota is None else bool(prior_mota > MOTA_GATE)
    counts, verdicts = [], []
    for b in tra_boxes:
        rs, cs = _box_slice(b, m.shape)
        n = count_components(m[rs, cs], b.area * min_area_fraction)
        counts.append(n)
        verdicts.append(Verdict.INEFFECTIVE if n >= 2 else Verdict.EFFECTIVE)
    return EffectivenessReport(gate, fg_ratio, counts, verdicts)


def compute_box_weights(mota_tra, mota_deep, alpha):
    """Box weights from both branches' MOTA and the human confidence ``alpha``.

    The raw products ``alpha * share_deep`` and ``(1 - alpha) * share_tra`` are
    renormalized to sum to one.

    Returns
    -------
    (w_deep, w_tra) : tuple of float
    """
    check_interval(alpha, "alpha", 0.0, 1.0)
    if mota_tra < 0 or mota_deep < 0:
        raise InvalidInputError("MOTA values must be non-negative here")
    total = mota_tra + mota_deep
    if total <= 0:
        raise DegenerateInputError("both MOTA values are zero")
    raw_deep = alpha * mota_deep / total
    raw_tra = (1.0 - alpha) * mota_tra / total
    s = raw_deep + raw_tra
    if s <= 0:
        raise DegenerateInputError("both box weights vanish")
    return raw_deep / s, raw_tra / s


def compute_theta_weights(mvf1_tra, mvf1_deep):
    if mvf1_tra <= 0 or mvf1_deep <= 0:
        raise InvalidInputError("MVF1 priors must be positive")
    total = mvf1_tra + mvf1_deep
    return mvf1_deep / total, mvf1_tra / total


def traditional_mvf1(prior_mota):
    """Prior MVF1 credited to the background branch from its known MOTA."""
    return MVF1_TRA_GOOD if prior_mota is not None and prior_mota >= MOTA_GATE else MVF1_TRA_POOR


def fuse_boxes(b_deep: BoundingBox, b_tra: Optional[BoundingBox], w_deep=0.5, w_tra=0.5) -> BoundingBox:
    if b_tra is None or w_deep == 1.0:
        return b_deep
    v = w_deep * b_deep.as_array() + w_tra * b_tra.as_array()
    return BoundingBox(*v.tolist(), b_deep.confidence, b_deep.class_id)


def motion_pixel_score(motion_pixels, area, R=0.2):
    """Saturating motion-pixel ratio: ``p / (area * R)`` below ``R``, 1 from there on."""
    check_interval(R, "R", 0.0, 1.0, (False, True))
    if area <= 0:
        raise InvalidInputError("box area must be positive")
    ratio = motion_pixels / area
    return ratio / R if ratio < R else 1.0


def theta_traditional(box: BoundingBox, mask, effective: bool, matched: bool, R=0.2) -> float:
    """Stillness score the background branch assigns to one detection-branch box.

    Effective branch: 1 if no background detection matched the box, else 0.
    Malfunctioning branch: one minus the saturating motion-pixel score of the
    box, so a box full of motion pixels scores 0 like a matched detection.
    """
    if effective:
        return 0.0 if matched else 1.0
    m = check_mask(mask)
    rs, cs = _box_slice(box, m.shape)
    p = float(m[rs, cs].sum())
    return 1.0 - motion_pixel_score(p, box.w * box.h, R)


def fuse_theta(theta_deep, theta_tra, mvf1_tra, mvf1_deep):
    w_deep, w_tra = compute_theta_weights(mvf1_tra, mvf1_deep)
    return w_deep * theta_deep + w_tra * theta_tra


def _label(theta, threshold):
    if theta is None:
        return MotionLabel.UNKNOWN
    return MotionLabel.STATIONARY if theta > threshold else MotionLabel.MOVING


def fuse_frame(deep: List[TrackRecord], tra: List[TrackRecord], mask, report: EffectivenessReport,
               weights: FusionWeights, verdicts: Dict[Tuple[int, int], object],
               R=0.2, threshold=0.5, iou_gate=0.3) -> List[FusedRecord]:
    """Fuse one frame of both branches.

    ``verdicts`` maps ``(frame, track_id)`` of deep records to their motion
    verdicts (anything with a ``theta`` attribute, None when unavailable).
    ``report.box_verdicts``, when present, must follow ``tra`` sorted by
    track id. Every deep record yields exactly one output row, in track-id
    order.
    """
    deep = sorted(deep, key=lambda r: r.track_id)
    tra = sorted(tra, key=lambda r: r.track_id)
    if report.box_verdicts and len(report.box_verdicts) != len(tra):
        raise InvalidInputError("report.box_verdicts must align with the traditional records")
    pairs, _, _ = match_boxes([r.box for r in deep], [r.box for r in tra], iou_gate)
    partner = dict(pairs)
    out = []
    for i, rec in enumerate(deep):
        j = partner.get(i)
        trusted = report.effective
        if j is not None and report.box_verdicts:
            trusted = trusted and report.box_verdicts[j] is Verdict.EFFECTIVE
        if trusted:
            box = fuse_boxes(rec.box, tra[j].box if j is not None else None, weights.box_deep, weights.box_tra)
        else:
            box = rec.box
        t_tra = theta_traditional(rec.box, mask, trusted, j is not None, R)
        v = verdicts.get((rec.frame, rec.track_id))
        t_deep = getattr(v, "theta", None)
        if t_deep is None:
            theta = t_tra
        else:
            theta = weights.theta_deep * t_deep + weights.theta_tra * t_tra
        out.append(FusedRecord(rec.frame, rec.track_id, box, theta, _label(theta, threshold)))
    return out
