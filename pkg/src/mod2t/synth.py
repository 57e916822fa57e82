"""Synthetic scenes with exact ground truth: frames, tracks, motion flags and masks.

The scene is composed in ground coordinates (a value-noise texture with
rectangular actors pasted on it) and then viewed through a per-frame camera
transform. An actor counts as moving at frame ``t`` when its ground-plane
center moved more than ``beta_d`` pixels since frame ``t - frame_gap``.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import cv2
import numpy as np

from mod2t.core import AffineTransform, BoundingBox, InvalidInputError, Source, TrackRecord
from mod2t.registration import stabilize_box

STATIC, MOVING, UNKNOWN = 0, 1, -1


@dataclass
class Actor:
    """A textured rectangle living in ground coordinates.

    ``start`` is the top-left corner at ``spawn``. ``path`` is one of
    ``static``, ``linear`` (constant ``velocity`` in px/frame) or
    ``waypoints`` (piecewise-linear through ``(frame, x, y)`` triples).
    """

    size: Tuple[int, int]
    start: Tuple[float, float] = (0.0, 0.0)
    spawn: int = 1
    despawn: Optional[int] = None
    path: str = "static"
    velocity: Tuple[float, float] = (0.0, 0.0)
    waypoints: List[Tuple[int, float, float]] = field(default_factory=list)
    intensity: float = 200.0
    texture: float = 20.0

    def position(self, t):
        """Top-left corner in ground coordinates at frame ``t``, rounded to whole pixels."""
        if self.path == "static":
            x, y = self.start
        elif self.path == "linear":
            k = t - self.spawn
            x = self.start[0] + self.velocity[0] * k
            y = self.start[1] + self.velocity[1] * k
        elif self.path == "waypoints":
            fr = np.array([w[0] for w in self.waypoints], dtype=float)
            x = float(np.interp(t, fr, [w[1] for w in self.waypoints]))
            y = float(np.interp(t, fr, [w[2] for w in self.waypoints]))
        else:
            raise InvalidInputError(f"unknown actor path {self.path!r}")
        return float(np.round(x)), float(np.round(y))


@dataclass
class SceneScript:
    width: int = 320
    height: int = 240
    frames: int = 100
    texture_seed: int = 0
    actors: List[Actor] = field(default_factory=list)
    camera_drift: Tuple[float, float] = (0.0, 0.0)
    camera: Optional[List[AffineTransform]] = None
    noise: float = 2.0
    texture_contrast: float = 40.0
    frame_gap: int = 3
    beta_d: Optional[float] = None

    @property
    def stationary_threshold(self):
        return self.beta_d if self.beta_d is not None else 0.01 * min(self.width, self.height)

    def camera_at(self, t):
        """Ground-to-image transform for frame ``t`` (1-based)."""
        if self.camera is not None:
            return self.camera[t - 1]
        dx, dy = self.camera_drift
        return AffineTransform.translation(-dx * (t - 1), -dy * (t - 1))

    def lifetime(self, actor):
        last = self.frames if actor.despawn is None else actor.despawn
        return range(actor.spawn, last + 1)

    def image_box(self, actor, t):
        x, y = actor.position(t)
        ground = BoundingBox(x, y, float(actor.size[0]), float(actor.size[1]))
        return stabilize_box(ground, self.camera_at(t))

    def validate(self):
        if self.width < 32 or self.height < 32 or self.frames < 1:
            raise InvalidInputError("scene must be at least 32x32 and one frame long")
        if self.camera is not None and len(self.camera) != self.frames:
            raise InvalidInputError("camera path needs one transform per frame")
        if self.frame_gap < 1:
            raise InvalidInputError("frame_gap must be >= 1")
        for k, a in enumerate(self.actors, 1):
            if a.size[0] < 1 or a.size[1] < 1:
                raise InvalidInputError(f"actor {k}: size must be positive")
            if a.path == "waypoints" and len(a.waypoints) < 1:
                raise InvalidInputError(f"actor {k}: waypoints path without waypoints")
            life = self.lifetime(a)
            if len(life) == 0 or a.spawn < 1:
                raise InvalidInputError(f"actor {k}: empty lifetime")
            for t in life:
                b = self.image_box(a, t)
                if b.x < 0 or b.y < 0 or b.x + b.w > self.width or b.y + b.h > self.height:
                    raise InvalidInputError(f"actor {k} leaves the frame at frame {t}")


@dataclass
class Scene:
    frames: List[np.ndarray]
    tracks: List[TrackRecord]
    motion: Dict[Tuple[int, int], int]
    masks: List[np.ndarray]
    camera: List[AffineTransform]


def value_noise(shape, seed, contrast=40.0, base=128.0, scales=(32, 12, 5)):
    """Smooth multi-octave noise texture, deterministic in ``seed``."""
    rng = np.random.default_rng(seed)
    h, w = shape
    out = np.zeros(shape)
    amp = 1.0
    total = 0.0
    for s in scales:
        grid = rng.uniform(-1.0, 1.0, (h // s + 2, w // s + 2))
        up = cv2.resize(grid, ((w // s + 2) * s, (h // s + 2) * s), interpolation=cv2.INTER_CUBIC)
        out += amp * up[:h, :w]
        total += amp
        amp *= 0.5
    return base + contrast * out / total


def _ground_extent(script):
    corners = [(0, 0), (script.width, 0), (0, script.height), (script.width, script.height)]
    pts = []
    for t in range(1, script.frames + 1):
        inv = script.camera_at(t).inverse()
        for c in corners:
            pts.append((inv.a11 * c[0] + inv.a12 * c[1] + inv.tx, inv.a21 * c[0] + inv.a22 * c[1] + inv.ty))
    for a in script.actors:
        for t in script.lifetime(a):
            x, y = a.position(t)
            pts += [(x, y), (x + a.size[0], y + a.size[1])]
    pts = np.array(pts)
    lo = np.floor(pts.min(axis=0)) - 8
    hi = np.ceil(pts.max(axis=0)) + 8
    return int(lo[0]), int(lo[1]), int(hi[0] - lo[0]), int(hi[1] - lo[1])


def motion_flags(script):
    """Ground-truth motion flag per (frame, actor id) by the displacement rule."""
    n = script.frame_gap
    beta = script.stationary_threshold
    flags = {}
    for k, a in enumerate(script.actors, 1):
        life = script.lifetime(a)
        for t in life:
            if t - n < a.spawn:
                flags[(t, k)] = UNKNOWN
                continue
            x0, y0 = a.position(t - n)
            x1, y1 = a.position(t)
            flags[(t, k)] = MOVING if np.hypot(x1 - x0, y1 - y0) > beta else STATIC
    return flags


def render(script: SceneScript, seed: int = 0) -> Scene:
    """Render ``script``; ``seed`` drives the per-frame sensor noise."""
    script.validate()
    ox, oy, gw, gh = _ground_extent(script)
    ground = value_noise((gh, gw), script.texture_seed, script.texture_contrast)
    patches = []
    for k, a in enumerate(script.actors, 1):
        tex = value_noise((a.size[1], a.size[0]), script.texture_seed * 7919 + k, a.texture,
                          base=a.intensity, scales=(6, 3))
        patches.append(tex)
    rng = np.random.default_rng(seed)

    frames, masks, tracks, cams = [], [], [], []
    for t in range(1, script.frames + 1):
        canvas = ground.copy()
        label = np.zeros((gh, gw), np.uint8)
        for k, (a, tex) in enumerate(zip(script.actors, patches), 1):
            if t not in script.lifetime(a):
                continue
            x, y = a.position(t)
            c0, r0 = int(x) - ox, int(y) - oy
            canvas[r0:r0 + a.size[1], c0:c0 + a.size[0]] = tex
            label[r0:r0 + a.size[1], c0:c0 + a.size[0]] = 1
            b = script.image_box(a, t)
            tracks.append(TrackRecord(t, k, BoundingBox(b.x, b.y, b.w, b.h, 1.0, 1), Source.DEEP, 1.0))
        cam = script.camera_at(t)
        m = cam.compose(AffineTransform.translation(ox, oy)).matrix
        img = cv2.warpAffine(canvas, m, (script.width, script.height), flags=cv2.INTER_LINEAR,
                             borderMode=cv2.BORDER_REFLECT)
        mask = cv2.warpAffine(label, m, (script.width, script.height), flags=cv2.INTER_NEAREST)
        if script.noise > 0:
            img = img + rng.normal(0.0, script.noise, img.shape)
        frames.append(np.clip(np.round(img), 0, 255).astype(np.uint8))
        masks.append(mask.astype(bool))
        cams.append(cam)
    tracks.sort(key=lambda r: (r.frame, r.track_id))
    return Scene(frames, tracks, motion_flags(script), masks, cams)


def degrade_tracks(tracks, drop_fraction: float = 0.0, jitter: float = 0.0, seed: int = 0):
    """Delete whole identities and jitter the survivors' boxes.

    ``round(drop_fraction * n_ids)`` identities are removed, taken from the
    front of a permutation seeded by ``seed``; each remaining box coordinate gets uniform
    noise in ``[-jitter, jitter]``.
    """
    if not 0.0 <= drop_fraction <= 1.0:
        raise InvalidInputError(f"drop fraction {drop_fraction} outside [0, 1]")
    if jitter < 0:
        raise InvalidInputError("jitter must be non-negative")
    rng = np.random.default_rng(seed)
    ids = sorted({r.track_id for r in tracks})
    n_drop = int(round(drop_fraction * len(ids)))
    # prefix of one permutation: larger fractions drop a superset under the same seed
    dropped = set(int(i) for i in rng.permutation(ids)[:n_drop])
    out = []
    for r in tracks:
        if r.track_id in dropped:
            continue
        if jitter > 0:
            dx, dy, dw, dh = rng.uniform(-jitter, jitter, 4)
            b = r.box
            box = BoundingBox(b.x + dx, b.y + dy, max(b.w + dw, 1e-3), max(b.h + dh, 1e-3),
                              b.confidence, b.class_id)
            r = replace(r, box=box)
        out.append(r)
    return out
