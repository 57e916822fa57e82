"""Command-line front end.

Every command reads and validates all of its inputs, computes its results in
memory and only then writes output files (each one atomically). Failures end
with one ``mod2t: error code=<n> kind=<kind> message=<text>`` line on stderr.
"""

import argparse
import logging
import os
import sys
from pathlib import Path

from mod2t import io as mio
from mod2t.bgmodel import DualGaussianBackground
from mod2t.core import InvalidInputError, Source, TrackRecord
from mod2t.fuse import FusedRecord
from mod2t.metrics import evaluate
from mod2t.pipeline import MoD2T, bf_trend, estimate_warps, format_bf_trend, labels_of
from mod2t.synth import render

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_VALIDATION, EXIT_INTERNAL = 0, 2, 3, 4, 5
LOG_ENV = "MOD2T_LOG_LEVEL"

log = logging.getLogger("mod2t")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _bf(text):
    if text == "adaptive":
        return text
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError("bf must be 'adaptive' or a non-negative number")
    return v


def _fractions(text):
    vals = [float(x) for x in text.split(",") if x.strip()]
    if not vals or any(not 0 <= v <= 1 for v in vals):
        raise argparse.ArgumentTypeError("fractions must be comma-separated values in [0, 1]")
    return vals


def build_parser():
    p = _Parser(prog="mod2t", description="Motion-state tracking: background model, judgment, fusion, evaluation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def cmd(name, help_text, *flags):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", type=Path, help="key=value configuration file")
        for flag, kw in flags:
            sp.add_argument(flag, **kw)
        return sp

    frames = ("--frames", dict(type=Path, required=True, help="directory of numbered frames"))
    deep = ("--deep-tracks", dict(type=Path, required=True, help="deep-branch track file"))
    out_file = ("--out", dict(type=Path, required=True, help="output file"))
    out_dir = ("--out", dict(type=Path, required=True, help="output directory"))
    prior = ("--prior-mota", dict(type=float, help="known MOTA of the background branch"))

    cmd("bgsub", "foreground masks (PGM) and blobs", frames, out_dir)
    cmd("track-tra", "traditional-branch tracks", frames, out_file)
    cmd("judge", "motion verdicts for deep tracks", frames, deep, out_file)
    cmd("fuse", "full pipeline: both branches, gate, judgment, fusion", frames, deep, prior, out_file)
    cmd("eval", "MVF1 / MOTA report",
        ("--pred", dict(type=Path, required=True, help="fused output file")),
        ("--gt", dict(type=Path, required=True)),
        ("--motion-gt", dict(type=Path, required=True)),
        ("--bf", dict(type=_bf, default="adaptive", help="'adaptive' or a fixed balance factor")),
        ("--out", dict(type=Path, help="report file (stdout when omitted)")))
    cmd("synth", "render a scene script (--config) to frames and ground truth",
        ("--seed", dict(type=_seed, default=0)), out_dir)
    cmd("bf-trend", "MVF1 under whole-identity deletion",
        ("--gt", dict(type=Path, required=True)),
        ("--motion-gt", dict(type=Path, required=True)),
        ("--seed", dict(type=_seed, default=0)),
        ("--fractions", dict(type=_fractions, default=[0.0, 0.2, 0.4, 0.6])),
        ("--pred", dict(type=Path, help="fused output to degrade instead of the ground truth")),
        out_file)
    return p


def _config(args):
    cfg = mio.read_config(args.config) if args.config else mio.RunConfig()
    if getattr(args, "prior_mota", None) is not None:
        cfg = cfg.replace(prior_mota=args.prior_mota).validate()
    return cfg


def _frames(args):
    return list(mio.read_image_sequence(args.frames))


def _check_deep(deep, n_frames):
    for r in deep:
        if r.frame > n_frames:
            raise InvalidInputError(f"deep track {r.track_id} refers to frame {r.frame}; only {n_frames} frames")


def run_bgsub(args):
    cfg = _config(args)
    frames = _frames(args)
    bg = DualGaussianBackground(cfg.grid_cell, cfg.theta_s, cfg.theta_d, cfg.theta_v, cfg.decay,
                                cfg.min_blob_area, cfg.variance_floor)
    masks = bg.fit_transform(frames, estimate_warps(frames, cfg))
    blobs = []
    for t, m in enumerate(masks, 1):
        blobs += [TrackRecord(t, k, b, Source.TRADITIONAL) for k, b in enumerate(bg.blobs(m), 1)]
    for t, m in enumerate(masks, 1):
        mio.write_mask_pgm(args.out / f"{t:06d}.pgm", m)
    mio.write_track_file(args.out / "blobs.txt", blobs)


def run_track_tra(args):
    cfg = _config(args)
    model = MoD2T(cfg).fit(_frames(args))
    mio.write_track_file(args.out, model.trace_.tra_tracks)


def run_judge(args):
    cfg = _config(args)
    frames = _frames(args)
    deep = mio.read_track_file(args.deep_tracks)
    _check_deep(deep, len(frames))
    model = MoD2T(cfg).fit(frames)
    verdicts = model.judge_.predict(deep)
    rows = [FusedRecord(r.frame, r.track_id, r.box, verdicts[(r.frame, r.track_id)].theta,
                        verdicts[(r.frame, r.track_id)].label) for r in deep]
    mio.write_fused_output(args.out, rows)


def run_fuse(args):
    cfg = _config(args)
    frames = _frames(args)
    deep = mio.read_track_file(args.deep_tracks)
    _check_deep(deep, len(frames))
    fused = MoD2T(cfg).fit_predict(frames, deep)
    mio.write_fused_output(args.out, fused)


def run_eval(args):
    cfg = _config(args)
    fused = mio.read_fused_output(args.pred)
    gt = mio.read_track_file(args.gt)
    motion = mio.read_motion_annotations(args.motion_gt)
    report = evaluate([r.as_track_record() for r in fused], labels_of(fused), gt, motion, cfg.eval_iou, args.bf)
    if args.out is None:
        sys.stdout.write(report.to_kv())
    else:
        mio.atomic_write_text(args.out, report.to_kv())


def run_synth(args):
    if args.config is None:
        raise UsageError("synth needs the scene script passed as --config")
    script = mio.read_scene_script(args.config)
    scene = render(script, seed=args.seed)
    mio.write_image_sequence(args.out / "frames", scene.frames)
    mio.write_track_file(args.out / "gt.txt", scene.tracks)
    mio.write_motion_annotations(args.out / "motion.txt", scene.motion)


def run_bf_trend(args):
    cfg = _config(args)
    gt = mio.read_track_file(args.gt)
    motion = mio.read_motion_annotations(args.motion_gt)
    pred = labels = None
    if args.pred is not None:
        fused = mio.read_fused_output(args.pred)
        pred, labels = [r.as_track_record() for r in fused], labels_of(fused)
    rows = bf_trend(gt, motion, args.fractions, args.seed, cfg.eval_iou, pred, labels)
    mio.atomic_write_text(args.out, format_bf_trend(rows))


COMMANDS = {"bgsub": run_bgsub, "track-tra": run_track_tra, "judge": run_judge, "fuse": run_fuse,
            "eval": run_eval, "synth": run_synth, "bf-trend": run_bf_trend}


def _fail(code, kind, exc):
    msg = " ".join(str(exc).split()) or type(exc).__name__
    sys.stderr.write(f"mod2t: error code={code} kind={kind} message={msg}\n")
    return code


def main(argv=None):
    level = getattr(logging, os.environ.get(LOG_ENV, "WARNING").upper(), logging.WARNING)
    logging.basicConfig(level=level if isinstance(level, int) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except InvalidInputError as exc:
        return _fail(EXIT_VALIDATION, "validation", exc)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc)
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        log.debug("internal error", exc_info=True)
        return _fail(EXIT_INTERNAL, "internal", exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
