"""Motion-state (MVF1) and tracking (CLEAR-MOT MOTA) evaluation.

Predictions and ground truth are matched per frame by maximum-IoU
assignment with IoU strictly above the threshold. On top of that matching:

* MVTP / MVFP count matched predictions whose moving/stationary label
  agrees / disagrees with the annotation (unknown on either side: skipped);
* MVFN counts annotated ground-truth objects no prediction matched;
* MVR discounts MVFN by the balance factor BF, which is either fixed or the
  mean of detection precision and recall.
"""

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Tuple

from mod2t.core import DegenerateInputError, InvalidInputError, match_boxes
from mod2t.validation import check_interval

UNKNOWN = -1


@dataclass
class FrameMatch:
    frame: int
    pairs: List[Tuple[int, int]]  # (pred track id, gt track id)
    fp: List[int]  # unmatched pred track ids
    fn: List[int]  # unmatched gt track ids


@dataclass
class MetricReport:
    mvtp: int = 0
    mvfp: int = 0
    mvfn: int = 0
    mvp: float = 0.0
    mvr: float = 0.0
    mvf1: float = 0.0
    bf: float = 0.0
    precision: float = 0.0
    recall: float = 0.0
    mota: float = float("nan")
    tp: int = 0
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    gt: int = 0
    flags: Tuple[str, ...] = field(default_factory=tuple)

    _ORDER = ("mvf1", "mvp", "mvr", "bf", "mvtp", "mvfp", "mvfn", "mota", "precision", "recall",
              "tp", "fp", "fn", "idsw", "gt")

    def to_kv(self):
        """Line-oriented ``key=value`` rendering; floats with 6 decimals."""
        lines = []
        for k in self._ORDER:
            v = getattr(self, k)
            lines.append(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
        lines.append("flags=" + ",".join(self.flags))
        return "\n".join(lines) + "\n"

    def to_text(self):
        flags = ", ".join(self.flags) if self.flags else "none"
        return (
            f"MVF1 {self.mvf1:.4f}  (MVP {self.mvp:.4f}, MVR {self.mvr:.4f}, BF {self.bf:.4f})\n"
            f"  MVTP {self.mvtp}  MVFP {self.mvfp}  MVFN {self.mvfn}\n"
            f"MOTA {self.mota:.4f}  (TP {self.tp}, FP {self.fp}, FN {self.fn}, IDSW {self.idsw}, GT {self.gt})\n"
            f"detection precision {self.precision:.4f}  recall {self.recall:.4f}\n"
            f"flags: {flags}\n"
        )

    @classmethod
    def from_kv(cls, text):
        kw = {}
        types = {k: type(v) for k, v in asdict(cls()).items()}
        for line in text.splitlines():
            if not line.strip():
                continue
            k, _, v = line.partition("=")
            if k == "flags":
                kw[k] = tuple(f for f in v.split(",") if f)
            elif k in types:
                kw[k] = types[k](v) if types[k] is not float else float(v)
            else:
                raise InvalidInputError(f"unknown metric key {k!r}")
        return cls(**kw)


def _by_frame(records):
    out = defaultdict(list)
    for r in records:
        out[r.frame].append(r)
    return out


def match_frame(pred, gt, iou_thresh=0.5, frame=0) -> FrameMatch:
    """Match one frame's predictions (TrackRecords) against its ground truth."""
    check_interval(iou_thresh, "iou_thresh", 0.0, 1.0, (False, False))
    pred = sorted(pred, key=lambda r: r.track_id)
    gt = sorted(gt, key=lambda r: r.track_id)
    pairs, up, ug = match_boxes([r.box for r in pred], [r.box for r in gt], iou_thresh, strict=True)
    return FrameMatch(frame,
                      [(pred[i].track_id, gt[j].track_id) for i, j in pairs],
                      [pred[i].track_id for i in up],
                      [gt[j].track_id for j in ug])


def match_sequence(pred, gt, iou_thresh=0.5) -> List[FrameMatch]:
    p, g = _by_frame(pred), _by_frame(gt)
    return [match_frame(p.get(f, []), g.get(f, []), iou_thresh, f) for f in sorted(set(p) | set(g))]


def count_id_switches(matches: List[FrameMatch]) -> int:
    last = {}
    idsw = 0
    for m in sorted(matches, key=lambda m: m.frame):
        for pid, gid in m.pairs:
            if gid in last and last[gid] != pid:
                idsw += 1
            last[gid] = pid
    return idsw


def mota(matches: List[FrameMatch]) -> float:
    """``1 - (FN + FP + IDSW) / GT`` over the sequence."""
    n_fn = sum(len(m.fn) for m in matches)
    n_fp = sum(len(m.fp) for m in matches)
    n_gt = sum(len(m.pairs) + len(m.fn) for m in matches)
    if n_gt == 0:
        raise DegenerateInputError("MOTA is undefined without ground-truth objects")
    return 1.0 - (n_fn + n_fp + count_id_switches(matches)) / n_gt


def detection_pr(matches: List[FrameMatch]):
    """Detection precision and recall; a zero denominator gives 0."""
    tp = sum(len(m.pairs) for m in matches)
    fp = sum(len(m.fp) for m in matches)
    fn = sum(len(m.fn) for m in matches)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def balance_factor(precision, recall):
    return 0.5 * (precision + recall)


def mvf1_from_counts(mvtp, mvfp, mvfn, bf):
    """MVP, MVR and their harmonic mean from the three counts."""
    mvp = mvtp / (mvtp + mvfp) if mvtp + mvfp else 0.0
    denom = mvtp + bf * mvfn
    mvr = mvtp / denom if denom > 0 else 0.0
    f1 = 2.0 * mvp * mvr / (mvp + mvr) if mvp + mvr > 0 else 0.0
    return mvp, mvr, f1


def motion_counts(matches, pred_labels: Dict[Tuple[int, int], int], gt_motion: Dict[Tuple[int, int], int]):
    """MVTP, MVFP, MVFN. Labels use 1 moving, 0 stationary, -1 unknown."""
    mvtp = mvfp = mvfn = 0
    for m in matches:
        for pid, gid in m.pairs:
            truth = gt_motion.get((m.frame, gid), UNKNOWN)
            guess = pred_labels.get((m.frame, pid), UNKNOWN)
            if truth == UNKNOWN or guess == UNKNOWN:
                continue
            if truth == guess:
                mvtp += 1
            else:
                mvfp += 1
        for gid in m.fn:
            if gt_motion.get((m.frame, gid), UNKNOWN) != UNKNOWN:
                mvfn += 1
    return mvtp, mvfp, mvfn


def evaluate(pred, pred_labels, gt, gt_motion, iou_thresh=0.5, bf="adaptive") -> MetricReport:
    """Full report for one sequence.

    Parameters
    ----------
    pred, gt : list of TrackRecord
    pred_labels, gt_motion : dict
        ``(frame, track_id) -> 1 | 0 | -1`` (moving, stationary, unknown).
    bf : "adaptive" or float
        Balance factor; a number fixes it (0 and 1 are the usual choices).
    """
    matches = match_sequence(pred, gt, iou_thresh)
    precision, recall = detection_pr(matches)
    flags = []
    if bf == "adaptive":
        bf_value = balance_factor(precision, recall)
    else:
        bf_value = check_interval(bf, "bf", 0.0, float("inf"))
    mvtp, mvfp, mvfn = motion_counts(matches, pred_labels, gt_motion)
    if mvtp + mvfp == 0:
        flags.append("no_labelled_matches")
    mvp, mvr, f1 = mvf1_from_counts(mvtp, mvfp, mvfn, bf_value)
    tp = sum(len(m.pairs) for m in matches)
    fp = sum(len(m.fp) for m in matches)
    fn = sum(len(m.fn) for m in matches)
    if tp + fp == 0:
        flags.append("no_predictions")
    try:
        mota_value = mota(matches)
    except DegenerateInputError:
        mota_value = float("nan")
        flags.append("no_ground_truth")
    return MetricReport(mvtp, mvfp, mvfn, mvp, mvr, f1, bf_value, precision, recall, mota_value,
                        tp, fp, fn, count_id_switches(matches), tp + fn, tuple(flags))
