"""Geometric value types and the box displacement / overlap math."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class DegenerateInputError(InvalidInputError):
    """Raised when inputs are valid individually but admit no defined result."""


class Source(str, enum.Enum):
    TRADITIONAL = "traditional"
    DEEP = "deep"
    FUSED = "fused"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixels, top-left corner plus extent."""

    x: float
    y: float
    w: float
    h: float
    confidence: Optional[float] = None
    class_id: Optional[int] = None

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise InvalidInputError(f"box extent must be positive, got w={self.w}, h={self.h}")
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise InvalidInputError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def center(self) -> Tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def to_xyxy(self) -> Tuple[float, float, float, float]:
        return (self.x, self.y, self.x + self.w, self.y + self.h)

    def with_center(self, cx: float, cy: float) -> "BoundingBox":
        return BoundingBox(cx - self.w / 2.0, cy - self.h / 2.0, self.w, self.h,
                           self.confidence, self.class_id)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=float)


@dataclass(frozen=True)
class TrackRecord:
    """One observation of one identity in one frame.

    ``visibility`` carries the ninth MOT column through a round trip; it is
    not interpreted anywhere.
    """

    frame: int
    track_id: int
    box: BoundingBox
    source: Source = Source.DEEP
    visibility: Optional[float] = None

    def __post_init__(self):
        if self.frame < 1:
            raise InvalidInputError(f"frame index must be >= 1, got {self.frame}")
        if self.track_id < 1:
            raise InvalidInputError(f"track id must be positive, got {self.track_id}")


@dataclass(frozen=True)
class AffineTransform:
    """2x3 affine map ``p' = A p + t`` in pixel coordinates.

    ``converged`` is False when the transform came out of an estimator that
    stopped before meeting its convergence criterion.
    """

    a11: float = 1.0
    a12: float = 0.0
    tx: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    ty: float = 0.0
    converged: bool = True

    def __post_init__(self):
        if abs(self.determinant) < 1e-12:
            raise InvalidInputError("affine transform is not invertible")

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls()

    @classmethod
    def translation(cls, dx: float, dy: float) -> "AffineTransform":
        return cls(tx=dx, ty=dy)

    @classmethod
    def from_matrix(cls, m, converged: bool = True) -> "AffineTransform":
        m = np.asarray(m, dtype=float)
        if m.shape != (2, 3):
            raise InvalidInputError(f"expected a 2x3 matrix, got shape {m.shape}")
        return cls(m[0, 0], m[0, 1], m[0, 2], m[1, 0], m[1, 1], m[1, 2], converged)

    @property
    def determinant(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12, self.tx], [self.a21, self.a22, self.ty]])

    def inverse(self) -> "AffineTransform":
        det = self.determinant
        i11, i12 = self.a22 / det, -self.a12 / det
        i21, i22 = -self.a21 / det, self.a11 / det
        return AffineTransform(i11, i12, -(i11 * self.tx + i12 * self.ty),
                               i21, i22, -(i21 * self.tx + i22 * self.ty), self.converged)

    def compose(self, first: "AffineTransform") -> "AffineTransform":
        """Return ``self o first`` (apply ``first``, then ``self``)."""
        m = np.vstack([self.matrix, [0, 0, 1]]) @ np.vstack([first.matrix, [0, 0, 1]])
        return AffineTransform.from_matrix(m[:2], self.converged and first.converged)


def _check_box(b: BoundingBox) -> None:
    if not (b.w > 0 and b.h > 0):
        raise InvalidInputError(f"degenerate box {b}")


def mahalanobis_distance(b1: BoundingBox, b2: BoundingBox) -> float:
    """Center displacement between two boxes, scaled by the first box's half extents.

    The covariance is ``diag(w1^2/4, h1^2/4)`` so a shift by half the width
    of ``b1`` gives a distance of 1. ``b1`` is expected to be the older box.
    """
    _check_box(b1)
    _check_box(b2)
    c1x, c1y = b1.center
    c2x, c2y = b2.center
    dx, dy = c1x - c2x, c1y - c2y
    return math.sqrt(dx * dx / (b1.w * b1.w / 4.0) + dy * dy / (b1.h * b1.h / 4.0))


def iou(b1: BoundingBox, b2: BoundingBox) -> float:
    ix = min(b1.x + b1.w, b2.x + b2.w) - max(b1.x, b2.x)
    iy = min(b1.y + b1.h, b2.y + b2.h) - max(b1.y, b2.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = b1.area + b2.area - inter
    # rounding in (x + w) - x can push the ratio a hair above 1
    return min(inter / union, 1.0) if union > 0 else 0.0


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise IoU, rows indexed by ``boxes_a``."""
    if len(boxes_a) == 0 or len(boxes_b) == 0:
        return np.zeros((len(boxes_a), len(boxes_b)))
    a = np.array([b.to_xyxy() for b in boxes_a], dtype=float)
    b = np.array([b.to_xyxy() for b in boxes_b], dtype=float)
    ix = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    iy = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(ix, 0, None) * np.clip(iy, 0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.minimum(np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0), 1.0)


def apply_transform(t: AffineTransform, p) -> Tuple[float, float]:
    x, y = p
    return (t.a11 * x + t.a12 * y + t.tx, t.a21 * x + t.a22 * y + t.ty)


def match_boxes(boxes_a, boxes_b, gate: float, strict: bool = False):
    """One-to-one maximum-total-IoU assignment restricted to pairs passing ``gate``.

    Pairs below the gate (or equal to it when ``strict``) are given zero
    profit, so they can never displace an admissible pair.

    Returns
    -------
    pairs : list of (i, j)
        Index pairs into ``boxes_a`` / ``boxes_b``, sorted by ``i``.
    unmatched_a, unmatched_b : list of int
    """
    scores = iou_matrix(boxes_a, boxes_b)
    ok = scores > gate if strict else scores >= gate
    profit = np.where(ok, scores, 0.0)
    pairs = []
    if profit.size:
        rows, cols = linear_sum_assignment(-profit)
        pairs = sorted((int(i), int(j)) for i, j in zip(rows, cols) if ok[i, j] and profit[i, j] > 0)
    used_a = {i for i, _ in pairs}
    used_b = {j for _, j in pairs}
    return (pairs,
            [i for i in range(len(boxes_a)) if i not in used_a],
            [j for j in range(len(boxes_b)) if j not in used_b])
