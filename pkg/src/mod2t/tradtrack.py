"""SORT-style blob tracker for the background-subtraction branch.

Each track predicts its next box with a constant-velocity model; predictions
and detections are paired by a gated Hungarian match on IoU.
"""

import enum
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from mod2t.core import BoundingBox, Source, TrackRecord, match_boxes
from mod2t.validation import check_interval, check_positive_int


class TrackStatus(str, enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"


@dataclass
class TrackState:
    track_id: int
    box: BoundingBox
    velocity: tuple = (0.0, 0.0)
    hits: int = 1
    age_since_update: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE
    last_observed: BoundingBox = None

    def __post_init__(self):
        if self.last_observed is None:
            self.last_observed = self.box

    def predicted(self):
        vx, vy = self.velocity
        b = self.box
        return BoundingBox(b.x + vx, b.y + vy, b.w, b.h)


class BlobTracker(BaseEstimator):
    """Track foreground blobs frame by frame.

    Parameters
    ----------
    iou_gate : float, default=0.3
        Minimum IoU between a predicted box and a blob for them to be paired.
    max_age : int, default=30
        Frames a track may coast without a matching blob before it is dropped.
    min_hits : int, default=3
        Matched frames needed before a track is reported.
    velocity_smoothing : float, default=0.5
        Weight of the newest displacement in the running velocity estimate.
    """

    def __init__(self, iou_gate=0.3, max_age=30, min_hits=3, velocity_smoothing=0.5):
        self.iou_gate = iou_gate
        self.max_age = max_age
        self.min_hits = min_hits
        self.velocity_smoothing = velocity_smoothing

    def _validate_params(self):
        check_interval(self.iou_gate, "iou_gate", 0.0, 1.0, (False, False))
        check_positive_int(self.max_age, "max_age")
        check_positive_int(self.min_hits, "min_hits")
        check_interval(self.velocity_smoothing, "velocity_smoothing", 0.0, 1.0)

    def reset(self):
        self.tracks_ = []
        self.frame_ = 0
        self.next_id_ = 1
        return self

    def update(self, blobs):
        """Consume one frame of blobs and return the confirmed tracks seen in it."""
        self._validate_params()
        if not hasattr(self, "tracks_"):
            self.reset()
        self.frame_ += 1
        tracks = sorted(self.tracks_, key=lambda s: s.track_id)
        predictions = [s.predicted() for s in tracks]
        pairs, lost, fresh = match_boxes(predictions, list(blobs), self.iou_gate)

        a = self.velocity_smoothing
        for i, j in pairs:
            s, b = tracks[i], blobs[j]
            (ox, oy), (nx, ny) = s.last_observed.center, b.center
            steps = s.age_since_update + 1
            vx = (nx - ox) / steps
            vy = (ny - oy) / steps
            s.velocity = (a * vx + (1 - a) * s.velocity[0], a * vy + (1 - a) * s.velocity[1])
            s.box = b
            s.last_observed = b
            s.hits += 1
            s.age_since_update = 0
            if s.hits >= self.min_hits:
                s.status = TrackStatus.CONFIRMED
        for i in lost:
            s = tracks[i]
            s.box = predictions[i]
            s.age_since_update += 1
            s.status = TrackStatus.LOST
        for j in fresh:
            tracks.append(TrackState(self.next_id_, blobs[j]))
            self.next_id_ += 1
        self.tracks_ = [s for s in tracks if s.age_since_update <= self.max_age]

        out = []
        for s in self.tracks_:
            if s.age_since_update == 0 and s.hits >= self.min_hits:
                s.status = TrackStatus.CONFIRMED
                out.append(TrackRecord(self.frame_, s.track_id, s.box, Source.TRADITIONAL))
        return sorted(out, key=lambda r: r.track_id)

    def fit_predict(self, blob_sequence):
        """Track a whole sequence from scratch; returns all emitted records."""
        self.reset()
        out = []
        for blobs in blob_sequence:
            out.extend(self.update(blobs))
        return out


def track_step(tracker: BlobTracker, blobs):
    return tracker.update(blobs)
