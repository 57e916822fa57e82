"""Text formats and dataset plumbing.

Track files use the MOT-Challenge layout
``frame,id,x,y,w,h,conf,class,visibility`` with ``-1`` for absent values;
fused output appends ``theta,label``. Motion annotations live in a sidecar
``frame,id,motion`` file (1 moving, 0 static, -1 unknown). Configuration and
scene scripts are ``key=value`` lines, ``#`` starts a comment.
"""

import dataclasses
import io
import math
import os
import re
import tempfile
import typing
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from mod2t.core import BoundingBox, InvalidInputError, Source, TrackRecord
from mod2t.fuse import FusedRecord
from mod2t.judge import MotionLabel


class ParseError(InvalidInputError):
    """Malformed input text; carries the file and 1-based line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if path is not None and line is not None else ""
        super().__init__(where + message)


def atomic_write_text(path, text):
    """Write via a temporary sibling and rename, so readers never see partial files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    return f"{v:.6f}"


def _opt_float(tok):
    v = float(tok)
    return None if v == -1 else v


def _opt_int(tok):
    v = int(float(tok))
    return None if v == -1 else v


def _parse_track_row(cols, path, lineno, source):
    if len(cols) < 6:
        raise ParseError(f"expected at least 6 columns, got {len(cols)}", path, lineno)
    try:
        frame = int(float(cols[0]))
        tid = int(float(cols[1]))
        x, y, w, h = (float(c) for c in cols[2:6])
        conf = _opt_float(cols[6]) if len(cols) > 6 else None
        cls = _opt_int(cols[7]) if len(cols) > 7 else None
        vis = _opt_float(cols[8]) if len(cols) > 8 else None
        return TrackRecord(frame, tid, BoundingBox(x, y, w, h, conf, cls), source, vis)
    except (ValueError, InvalidInputError) as exc:
        raise ParseError(str(exc), path, lineno) from None


def _rows(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s and not s.startswith("#"):
            yield lineno, [c.strip() for c in s.split(",")]


def parse_tracks(text, source=Source.DEEP, path="<string>"):
    return [_parse_track_row(cols, path, n, source) for n, cols in _rows(text)]


def read_track_file(path, source=Source.DEEP):
    """Read a MOT-layout track file into TrackRecords (extra trailing columns ignored)."""
    return parse_tracks(Path(path).read_text(), source, str(path))


def _track_cols(r):
    b = r.box
    return [str(r.frame), str(r.track_id), _fmt(b.x), _fmt(b.y), _fmt(b.w), _fmt(b.h),
            "-1" if b.confidence is None else _fmt(b.confidence),
            "-1" if b.class_id is None else str(b.class_id),
            "-1" if r.visibility is None else _fmt(r.visibility)]


def serialize_tracks(records):
    rows = sorted(records, key=lambda r: (r.frame, r.track_id))
    return "".join(",".join(_track_cols(r)) + "\n" for r in rows)


def write_track_file(path, records):
    atomic_write_text(path, serialize_tracks(records))


def serialize_fused(fused):
    lines = []
    for r in sorted(fused, key=lambda r: (r.frame, r.track_id)):
        cols = _track_cols(TrackRecord(r.frame, r.track_id, r.box, Source.FUSED))
        cols.append("-1" if r.theta is None else _fmt(r.theta))
        cols.append(str(r.label.code))
        lines.append(",".join(cols) + "\n")
    return "".join(lines)


def write_fused_output(path, fused):
    atomic_write_text(path, serialize_fused(fused))


def parse_fused(text, path="<string>"):
    out = []
    for n, cols in _rows(text):
        if len(cols) != 11:
            raise ParseError(f"fused rows have 11 columns, got {len(cols)}", path, n)
        rec = _parse_track_row(cols[:9], path, n, Source.FUSED)
        try:
            theta = _opt_float(cols[9])
            label = MotionLabel.from_code(int(cols[10]))
        except (ValueError, KeyError):
            raise ParseError(f"bad theta/label columns {cols[9:]}", path, n) from None
        out.append(FusedRecord(rec.frame, rec.track_id, rec.box, theta, label))
    return out


def read_fused_output(path):
    return parse_fused(Path(path).read_text(), str(path))


def parse_motion(text, path="<string>"):
    out = {}
    for n, cols in _rows(text):
        if len(cols) != 3:
            raise ParseError(f"expected frame,id,motion, got {len(cols)} columns", path, n)
        try:
            frame, tid, motion = (int(c) for c in cols)
        except ValueError:
            raise ParseError(f"non-integer field in {cols}", path, n) from None
        if motion not in (-1, 0, 1):
            raise ParseError(f"motion flag must be -1, 0 or 1, got {motion}", path, n)
        if (frame, tid) in out:
            raise ParseError(f"duplicate entry for frame {frame}, id {tid}", path, n)
        out[(frame, tid)] = motion
    return out


def read_motion_annotations(path):
    return parse_motion(Path(path).read_text(), str(path))


def serialize_motion(motion):
    return "".join(f"{f},{i},{m}\n" for (f, i), m in sorted(motion.items()))


def write_motion_annotations(path, motion):
    atomic_write_text(path, serialize_motion(motion))


_FRAME_NAME = re.compile(r"^(\d+)\.(png|jpg|jpeg|pgm|bmp)$", re.IGNORECASE)


def _load_gray(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L"), dtype=np.uint8)


def list_image_sequence(directory):
    """Numbered frame files in ascending order; raises on gaps in the numbering."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    found = {}
    for p in d.iterdir():
        m = _FRAME_NAME.match(p.name)
        if m:
            idx = int(m.group(1))
            if idx in found:
                raise InvalidInputError(f"frame {idx} appears twice ({found[idx].name}, {p.name})")
            found[idx] = p
    if not found:
        raise InvalidInputError(f"no numbered image files in {directory}")
    idx = sorted(found)
    missing = sorted(set(range(idx[0], idx[-1] + 1)) - set(idx))
    if missing:
        raise InvalidInputError(f"missing frames in {directory}: {missing}")
    return [found[i] for i in idx]


def read_image_sequence(directory):
    """Iterate frames as 8-bit grayscale arrays (color input is luma-converted)."""
    paths = list_image_sequence(directory)
    return (_load_gray(p) for p in paths)


def _encode(array, fmt):
    buf = io.BytesIO()
    Image.fromarray(array, mode="L").save(buf, format=fmt)
    return buf.getvalue()


def write_image_sequence(directory, frames, digits=6):
    """Frames as ``000001.png``, ``000002.png``, ... (8-bit grayscale)."""
    d = Path(directory)
    for k, f in enumerate(frames, 1):
        atomic_write_bytes(d / f"{k:0{digits}d}.png", _encode(np.asarray(f, dtype=np.uint8), "PNG"))


def write_mask_pgm(path, mask):
    """8-bit binary PGM, 0 background and 255 foreground."""
    m = (np.asarray(mask, dtype=bool) * 255).astype(np.uint8)
    atomic_write_bytes(path, _encode(m, "PPM"))


# --- run configuration ---------------------------------------------------


def _rng(lo, hi, lo_open=False, hi_open=False):
    def check(name, v):
        if (v < lo or (lo_open and v == lo)) or (v > hi or (hi_open and v == hi)):
            raise InvalidInputError(f"{name}={v} out of range")
    return check


def _choice(*options):
    def check(name, v):
        if v not in options:
            raise InvalidInputError(f"{name} must be one of {options}, got {v!r}")
    return check


_INF = math.inf


@dataclass
class RunConfig:
    """Every tunable of the pipeline. ``None`` means "derive automatically"."""

    # background model
    grid_cell: int = dataclasses.field(default=4, metadata={"check": _rng(1, 4096)})
    theta_s: float = dataclasses.field(default=2.5, metadata={"check": _rng(0, _INF, True)})
    theta_d: float = dataclasses.field(default=4.0, metadata={"check": _rng(0, _INF, True)})
    theta_v: float = dataclasses.field(default=400.0, metadata={"check": _rng(0, _INF, True)})
    decay: float = dataclasses.field(default=0.001, metadata={"check": _rng(0, _INF, True)})
    variance_floor: float = dataclasses.field(default=1.0, metadata={"check": _rng(0, _INF)})
    min_blob_area: int = dataclasses.field(default=40, metadata={"check": _rng(0, 10**9)})
    # registration
    pyramid_levels: int = dataclasses.field(default=3, metadata={"check": _rng(1, 10)})
    max_iterations: int = dataclasses.field(default=50, metadata={"check": _rng(1, 10**6)})
    convergence_eps: float = dataclasses.field(default=1e-4, metadata={"check": _rng(0, _INF, True)})
    motion_model: str = dataclasses.field(default="affine", metadata={"check": _choice("affine", "translation")})
    # traditional tracker
    tracker_iou_gate: float = dataclasses.field(default=0.3, metadata={"check": _rng(0, 1, True, True)})
    max_age: int = dataclasses.field(default=30, metadata={"check": _rng(1, 10**6)})
    min_hits: int = dataclasses.field(default=3, metadata={"check": _rng(1, 10**6)})
    # motion judgment
    frame_gap: int = dataclasses.field(default=3, metadata={"check": _rng(1, 10**6)})
    lam: float = dataclasses.field(default=0.3, metadata={"check": _rng(0, 1)})
    beta_d: Optional[float] = dataclasses.field(default=None, metadata={"check": _rng(0, _INF, True)})
    threshold: float = dataclasses.field(default=0.5, metadata={"check": _rng(0, 1, True, True)})
    patch_height: int = dataclasses.field(default=256, metadata={"check": _rng(1, 10**5)})
    patch_width: int = dataclasses.field(default=192, metadata={"check": _rng(1, 10**5)})
    boundary_margin: int = dataclasses.field(default=15, metadata={"check": _rng(0, 10**5)})
    r1: float = dataclasses.field(default=6.5025, metadata={"check": _rng(0, _INF, True)})
    r2: float = dataclasses.field(default=58.5225, metadata={"check": _rng(0, _INF, True)})
    distance_units: str = dataclasses.field(default="pixels", metadata={"check": _choice("pixels", "mahalanobis")})
    # fusion
    R: float = dataclasses.field(default=0.2, metadata={"check": _rng(0, 1, True)})
    alpha: float = dataclasses.field(default=0.5, metadata={"check": _rng(0, 1)})
    fusion_iou_gate: float = dataclasses.field(default=0.3, metadata={"check": _rng(0, 1, True, True)})
    min_component_fraction: float = dataclasses.field(default=0.2, metadata={"check": _rng(0, 1, True)})
    prior_mota: Optional[float] = dataclasses.field(default=None, metadata={"check": _rng(-_INF, 1)})
    mota_deep: float = dataclasses.field(default=0.5, metadata={"check": _rng(0, 1)})
    mvf1_deep: float = dataclasses.field(default=1.0, metadata={"check": _rng(0, 1, True)})
    mvf1_tra: Optional[float] = dataclasses.field(default=None, metadata={"check": _rng(0, 1, True)})
    # evaluation
    eval_iou: float = dataclasses.field(default=0.5, metadata={"check": _rng(0, 1, True, True)})

    def __post_init__(self):
        self.validate()

    def validate(self):
        for f in fields(self):
            v = getattr(self, f.name)
            kind, optional = _field_kind(f.name)
            if v is None:
                if not optional:
                    raise InvalidInputError(f"{f.name} is required")
                continue
            numeric = isinstance(v, (int, float)) and not isinstance(v, bool)
            if (kind is int and not isinstance(v, int)) or (kind is float and not numeric) \
                    or (kind is str and not isinstance(v, str)):
                raise InvalidInputError(f"{f.name} must be {kind.__name__}, got {v!r}")
            f.metadata["check"](f.name, v)
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _field_kind(name):
    """Underlying scalar type of a RunConfig field and whether it may be None."""
    hint = typing.get_type_hints(RunConfig)[name]
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    return (args[0] if args else hint), bool(args)


def _coerce(f, raw):
    kind, optional = _field_kind(f.name)
    if optional and raw.lower() in ("auto", "none"):
        return None
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
        return raw
    except ValueError:
        raise InvalidInputError(f"{f.name}: cannot read {raw!r} as {kind.__name__}") from None


def parse_config(text, path="<string>"):
    known = {f.name: f for f in fields(RunConfig)}
    values = {}
    for n, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        key, sep, raw = s.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep:
            raise ParseError(f"expected key=value, got {s!r}", path, n)
        if key not in known:
            raise ParseError(f"unknown configuration key {key!r}", path, n)
        if key in values:
            raise ParseError(f"duplicate key {key!r}", path, n)
        try:
            values[key] = _coerce(known[key], raw)
        except InvalidInputError as exc:
            raise ParseError(str(exc), path, n) from None
    try:
        return RunConfig(**values)
    except InvalidInputError as exc:
        raise ParseError(str(exc), path, None) from None


def read_config(path):
    return parse_config(Path(path).read_text(), str(path))


def serialize_config(cfg: RunConfig):
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name}={'auto' if v is None else repr(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def write_config(path, cfg):
    atomic_write_text(path, serialize_config(cfg))


# --- scene scripts -------------------------------------------------------

_SCENE_KEYS = {"width": int, "height": int, "frames": int, "texture_seed": int,
               "camera_drift": "pair", "noise": float, "texture_contrast": float,
               "frame_gap": int, "beta_d": "optfloat"}
_ACTOR_KEYS = {"size": "intpair", "start": "pair", "spawn": int, "despawn": "optint",
               "path": str, "velocity": "pair", "waypoints": "waypoints",
               "intensity": float, "texture": float}


def _read_value(kind, raw):
    if kind in (int, float, str):
        return kind(raw)
    if kind in ("optfloat", "optint"):
        if raw.lower() in ("auto", "none"):
            return None
        return float(raw) if kind == "optfloat" else int(raw)
    if kind in ("pair", "intpair"):
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != 2:
            raise ValueError(f"expected two comma-separated numbers, got {raw!r}")
        cast = int if kind == "intpair" else float
        return cast(parts[0]), cast(parts[1])
    if kind == "waypoints":
        out = []
        for item in raw.split(";"):
            f, x, y = item.split(":")
            out.append((int(f), float(x), float(y)))
        return out
    raise AssertionError(kind)


def _write_value(kind, v):
    if v is None:
        return "none"
    if kind in ("pair", "intpair"):
        return f"{v[0]!r},{v[1]!r}"
    if kind == "waypoints":
        return ";".join(f"{f}:{x!r}:{y!r}" for f, x, y in v)
    return repr(v) if isinstance(v, float) else str(v)


def parse_scene_script(text, path="<string>"):
    """Scene script: scene keys first, then one ``[actor]`` block per actor."""
    from mod2t.synth import Actor, SceneScript

    scene, actors, current = {}, [], None
    for n, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s == "[actor]":
            current = {}
            actors.append(current)
            continue
        key, sep, raw = s.partition("=")
        key, raw = key.strip(), raw.strip()
        table, target = (_SCENE_KEYS, scene) if current is None else (_ACTOR_KEYS, current)
        if not sep or key not in table:
            raise ParseError(f"unknown or malformed entry {s!r}", path, n)
        if key in target:
            raise ParseError(f"duplicate key {key!r}", path, n)
        try:
            target[key] = _read_value(table[key], raw)
        except ValueError as exc:
            raise ParseError(f"{key}: {exc}", path, n) from None
    try:
        script = SceneScript(actors=[Actor(**a) for a in actors], **scene)
        script.validate()
    except (TypeError, InvalidInputError) as exc:
        raise ParseError(str(exc), path, None) from None
    return script


def read_scene_script(path):
    return parse_scene_script(Path(path).read_text(), str(path))


def serialize_scene_script(script):
    if script.camera is not None:
        raise InvalidInputError("explicit per-frame camera paths have no text form; use camera_drift")
    lines = [f"{k}={_write_value(kind, getattr(script, k))}" for k, kind in _SCENE_KEYS.items()]
    for a in script.actors:
        lines.append("[actor]")
        for k, kind in _ACTOR_KEYS.items():
            if k == "waypoints" and not a.waypoints:
                continue
            lines.append(f"{k}={_write_value(kind, getattr(a, k))}")
    return "\n".join(lines) + "\n"
