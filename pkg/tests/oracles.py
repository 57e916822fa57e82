"""Independent brute-force evaluators written straight from the formulas.

They share no code with the package beyond the record types, use plain
Python arithmetic, and favour enumeration over cleverness.
"""

import math


def center(b):
    return b.x + b.w / 2.0, b.y + b.h / 2.0


def mahalanobis(b1, b2):
    (ax, ay), (bx, by) = center(b1), center(b2)
    c = [[b1.w ** 2 / 4.0, 0.0], [0.0, b1.h ** 2 / 4.0]]
    det = c[0][0] * c[1][1] - c[0][1] * c[1][0]
    inv = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]]
    v = [ax - bx, ay - by]
    q = sum(v[i] * inv[i][j] * v[j] for i in range(2) for j in range(2))
    return math.sqrt(q)


def motion_score(d, beta):
    if d <= beta:
        return 1.0 - d / beta
    return 0.0


def ssim(xs, ys, r1, r2):
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    vx = sum((x - mx) ** 2 for x in xs) / n
    vy = sum((y - my) ** 2 for y in ys) / n
    cxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / n
    return (2 * mx * my + r1) * (2 * cxy + r2) / ((mx ** 2 + my ** 2 + r1) * (vx + vy + r2))


def box_weights(mota_tra, mota_deep, alpha):
    raw_deep = alpha * mota_deep / (mota_tra + mota_deep)
    raw_tra = (1 - alpha) * mota_tra / (mota_tra + mota_deep)
    return raw_deep / (raw_deep + raw_tra), raw_tra / (raw_deep + raw_tra)


def theta_weights(mvf1_tra, mvf1_deep):
    return mvf1_deep / (mvf1_tra + mvf1_deep), mvf1_tra / (mvf1_tra + mvf1_deep)


def eq16(pixels, w, h, R):
    if pixels / (w * h) < R:
        return pixels / (w * h * R)
    return 1.0


def iou(a, b):
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    return inter / (a.w * a.h + b.w * b.h - inter)


def best_assignment(preds, gts, thr):
    """Depth-first enumeration of every partial one-to-one assignment; max total IoU wins."""
    scores = [[iou(p.box, g.box) for g in gts] for p in preds]
    best = [-1.0, []]

    def search(i, used, total, pairs):
        if i == len(preds):
            if total > best[0]:
                best[0], best[1] = total, list(pairs)
            return
        search(i + 1, used, total, pairs)
        for j in range(len(gts)):
            if j not in used and scores[i][j] > thr:
                pairs.append((i, j))
                search(i + 1, used | {j}, total + scores[i][j], pairs)
                pairs.pop()

    search(0, frozenset(), 0.0, [])
    return best[1]


def evaluate(pred, labels, gt, motion, thr=0.5, bf="adaptive"):
    frames = sorted({r.frame for r in pred} | {r.frame for r in gt})
    tp = fp = fn = idsw = mvtp = mvfp = mvfn = 0
    last = {}
    for f in frames:
        p = sorted([r for r in pred if r.frame == f], key=lambda r: r.track_id)
        g = sorted([r for r in gt if r.frame == f], key=lambda r: r.track_id)
        pairs = best_assignment(p, g, thr)
        tp += len(pairs)
        fp += len(p) - len(pairs)
        fn += len(g) - len(pairs)
        matched_g = set()
        for i, j in pairs:
            pid, gid = p[i].track_id, g[j].track_id
            matched_g.add(j)
            if gid in last and last[gid] != pid:
                idsw += 1
            last[gid] = pid
            truth = motion.get((f, gid), -1)
            guess = labels.get((f, pid), -1)
            if truth != -1 and guess != -1:
                if truth == guess:
                    mvtp += 1
                else:
                    mvfp += 1
        for j, r in enumerate(g):
            if j not in matched_g and motion.get((f, r.track_id), -1) != -1:
                mvfn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    b = (precision + recall) / 2 if bf == "adaptive" else bf
    mvp = mvtp / (mvtp + mvfp) if mvtp + mvfp else 0.0
    mvr = mvtp / (mvtp + b * mvfn) if mvtp + b * mvfn else 0.0
    mvf1 = 2 * mvp * mvr / (mvp + mvr) if mvp + mvr else 0.0
    gt_total = tp + fn
    mota = 1 - (fn + fp + idsw) / gt_total if gt_total else float("nan")
    return dict(tp=tp, fp=fp, fn=fn, idsw=idsw, mvtp=mvtp, mvfp=mvfp, mvfn=mvfn,
                precision=precision, recall=recall, bf=b, mvp=mvp, mvr=mvr, mvf1=mvf1, mota=mota)


def random_sequence(rng, n_frames=4, max_objects=3, n_ids=4):
    """Small random GT and prediction sets that exercise every matching case."""
    from mod2t.core import BoundingBox, TrackRecord

    gt, pred, motion, labels = [], [], {}, {}
    for f in range(1, n_frames + 1):
        ids = rng.choice(n_ids, size=rng.integers(0, max_objects + 1), replace=False) + 1
        for gid in ids:
            b = BoundingBox(float(rng.uniform(0, 60)), float(rng.uniform(0, 60)),
                            float(rng.uniform(8, 30)), float(rng.uniform(8, 30)))
            gt.append(TrackRecord(f, int(gid), b))
            motion[(f, int(gid))] = int(rng.choice([-1, 0, 1], p=[0.1, 0.45, 0.45]))
            if rng.random() < 0.8:
                pid = int(rng.choice(n_ids)) + 1 if rng.random() < 0.2 else int(gid)
                if any(r.frame == f and r.track_id == pid for r in pred):
                    continue
                j = rng.uniform(-6, 6, 4)
                pb = BoundingBox(b.x + j[0], b.y + j[1], max(b.w + j[2], 1.0), max(b.h + j[3], 1.0))
                pred.append(TrackRecord(f, pid, pb))
                labels[(f, pid)] = int(rng.choice([-1, 0, 1], p=[0.1, 0.45, 0.45]))
        if rng.random() < 0.3:
            pid = n_ids + 1 + f
            pred.append(TrackRecord(f, pid, BoundingBox(float(rng.uniform(0, 80)), float(rng.uniform(0, 80)), 10.0, 10.0)))
            labels[(f, pid)] = int(rng.choice([0, 1]))
    return pred, labels, gt, motion
