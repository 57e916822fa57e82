"""Dual-mode single-Gaussian background model on an N x N grid.

Every grid cell keeps two (mean, variance, age) triples: the current
background model ``A`` used for the foreground decision, and a candidate
``B`` that absorbs observations the current model rejects. When the
candidate becomes older than the current model the two swap roles.
"""

from dataclasses import dataclass

import cv2
import numpy as np
from sklearn.base import BaseEstimator

from mod2t.core import AffineTransform, BoundingBox, InvalidInputError
from mod2t.validation import check_gray_image, check_interval, check_mask, check_positive_int

_KERNEL = np.ones((3, 3), np.uint8)


@dataclass(frozen=True)
class GaussianCell:
    mean: float = 0.0
    var: float = 0.0
    age: float = 0.0


def decayed_age(age, var, theta_v, decay):
    """Age after the high-variance penalty; unchanged while ``var <= theta_v``."""
    age = np.asarray(age, dtype=float)
    var = np.asarray(var, dtype=float)
    return np.where(var > theta_v, age * np.exp(-decay * np.maximum(var - theta_v, 0.0)), age)


def _update(mean, var, age, m, v, theta_v, decay):
    a = decayed_age(age, var, theta_v, decay)
    keep = a / (a + 1.0)
    new = 1.0 / (a + 1.0)
    return keep * mean + new * m, keep * var + new * v, a + 1.0


def update_cell(cell: GaussianCell, m: float, v: float, theta_v: float = 400.0,
                decay: float = 0.001) -> GaussianCell:
    """Running-average update of one cell model with grid mean ``m`` and spread ``v``."""
    mean, var, age = _update(cell.mean, cell.var, cell.age, m, v, theta_v, decay)
    return GaussianCell(float(mean), float(var), float(age))


def _cell_edges(n, size):
    return np.arange(0, n, size)


def grid_statistics(frame, grid_cell: int = 4):
    """Per-cell mean intensity and maximum squared deviation from that mean.

    Cells on the right and bottom edges are truncated when the frame size is
    not a multiple of ``grid_cell``.

    Returns
    -------
    M, V : ndarray, shape (ceil(H / N), ceil(W / N))
    """
    img = check_gray_image(frame, "frame")
    rows = _cell_edges(img.shape[0], grid_cell)
    cols = _cell_edges(img.shape[1], grid_cell)
    sums = np.add.reduceat(np.add.reduceat(img, rows, axis=0), cols, axis=1)
    h_sizes = np.diff(np.append(rows, img.shape[0]))
    w_sizes = np.diff(np.append(cols, img.shape[1]))
    m = sums / np.outer(h_sizes, w_sizes)
    hi = np.maximum.reduceat(np.maximum.reduceat(img, rows, axis=0), cols, axis=1)
    lo = np.minimum.reduceat(np.minimum.reduceat(img, rows, axis=0), cols, axis=1)
    v = np.maximum(hi - m, m - lo) ** 2
    return m, v


def extract_blobs(mask, min_blob_area: int = 40):
    """Clean ``mask`` with a 3x3 opening then closing and box each 8-connected component."""
    m = check_mask(mask).astype(np.uint8)
    if not m.any():
        return []
    m = cv2.morphologyEx(m, cv2.MORPH_OPEN, _KERNEL)
    m = cv2.morphologyEx(m, cv2.MORPH_CLOSE, _KERNEL)
    n, _, stats, _ = cv2.connectedComponentsWithStats(m, connectivity=8)
    boxes = []
    for label in range(1, n):
        x, y, w, h, area = (int(s) for s in stats[label])
        if area >= min_blob_area:
            boxes.append(BoundingBox(float(x), float(y), float(w), float(h)))
    return boxes


class DualGaussianBackground(BaseEstimator):
    """Grid background subtractor with a current and a candidate Gaussian per cell.

    Parameters
    ----------
    grid_cell : int, default=4
        Side of the square pixel group sharing one model.
    theta_s : float, default=2.5
        A cell observation matches a model when its squared distance to the
        model mean is below ``theta_s`` times the model variance.
    theta_d : float, default=4.0
        A pixel is foreground when its squared distance to the current mean
        exceeds ``theta_d`` times the current variance.
    theta_v : float, default=400.0
        Variance above which a model's age is decayed before updating.
    decay : float, default=0.001
        Rate of that age decay.
    min_blob_area : int, default=40
        Smallest component, in pixels, reported by :meth:`blobs`.
    variance_floor : float, default=1.0
        Lower bound applied to every variance after an update.

    Attributes
    ----------
    mean_, var_, age_ : ndarray, shape (2, rows, cols)
        Index 0 is the current model, 1 the candidate.
    swapped_ : ndarray of bool
        Cells whose models exchanged roles during the last step.
    n_frames_ : int
    """

    def __init__(self, grid_cell=4, theta_s=2.5, theta_d=4.0, theta_v=400.0, decay=0.001,
                 min_blob_area=40, variance_floor=1.0):
        self.grid_cell = grid_cell
        self.theta_s = theta_s
        self.theta_d = theta_d
        self.theta_v = theta_v
        self.decay = decay
        self.min_blob_area = min_blob_area
        self.variance_floor = variance_floor

    def _validate_params(self):
        check_positive_int(self.grid_cell, "grid_cell")
        for name in ("theta_s", "theta_d", "theta_v", "decay"):
            check_interval(getattr(self, name), name, 0.0, np.inf, (False, False))
        check_positive_int(self.min_blob_area, "min_blob_area", 0)
        check_interval(self.variance_floor, "variance_floor", 0.0, np.inf, (True, False))

    def reset(self):
        for attr in ("mean_", "var_", "age_", "swapped_", "shape_", "residual_", "n_frames_"):
            self.__dict__.pop(attr, None)
        return self

    def _initialize(self, img):
        m, _ = grid_statistics(img, self.grid_cell)
        shape = (2,) + m.shape
        self.mean_ = np.zeros(shape)
        self.var_ = np.zeros(shape)
        self.age_ = np.zeros(shape)
        self.mean_[0] = m
        self.var_[0] = self.theta_v / 4.0
        self.age_[0] = 1.0
        self.swapped_ = np.zeros(m.shape, dtype=bool)
        self.shape_ = img.shape
        self.residual_ = AffineTransform.identity()
        self.n_frames_ = 1

    def _compensate(self, warp):
        """Re-index cell models so they line up with the current frame."""
        r = warp.compose(self.residual_)
        if np.allclose(r.matrix, AffineTransform.identity().matrix, atol=1e-9):
            self.residual_ = AffineTransform.identity()
            return
        n = self.grid_cell
        rows, cols = self.mean_.shape[1:]
        cy = (np.arange(rows) + 0.5) * n
        cx = (np.arange(cols) + 0.5) * n
        gx, gy = np.meshgrid(cx, cy)
        inv = r.inverse()
        sx = inv.a11 * gx + inv.a12 * gy + inv.tx
        sy = inv.a21 * gx + inv.a22 * gy + inv.ty
        src_c = np.floor(sx / n).astype(int)
        src_r = np.floor(sy / n).astype(int)
        inside = (src_c >= 0) & (src_c < cols) & (src_r >= 0) & (src_r < rows)
        sr = np.clip(src_r, 0, rows - 1)
        sc = np.clip(src_c, 0, cols - 1)
        for arr in (self.mean_, self.var_, self.age_):
            arr[:] = np.where(inside, arr[:, sr, sc], 0.0)

        # Whole-cell shift applied at the frame center; the sub-cell remainder
        # is carried into the next step so slow drift is not rounded away.
        mid_r, mid_c = rows // 2, cols // 2
        k_r = mid_r - src_r[mid_r, mid_c]
        k_c = mid_c - src_c[mid_r, mid_c]
        h, w = self.shape_
        px, py = w / 2.0, h / 2.0
        qx = r.a11 * px + r.a12 * py + r.tx
        qy = r.a21 * px + r.a22 * py + r.ty
        self.residual_ = AffineTransform.translation(qx - px - k_c * n, qy - py - k_r * n)

    def step(self, frame, warp=None):
        """Advance the model by one frame and return its foreground mask.

        ``warp`` maps the previous frame's coordinates into this frame's.
        """
        self._validate_params()
        img = check_gray_image(frame, "frame")
        if not hasattr(self, "mean_"):
            self._initialize(img)
            return self._foreground(img)
        if img.shape != self.shape_:
            raise InvalidInputError(f"frame shape {img.shape} does not match model shape {self.shape_}")
        if warp is not None:
            self._compensate(warp)

        m, v = grid_statistics(img, self.grid_cell)
        mean, var, age = self.mean_, self.var_, self.age_
        match_a = (m - mean[0]) ** 2 < self.theta_s * var[0]
        match_b = ~match_a & ((m - mean[1]) ** 2 < self.theta_s * var[1])
        reset_b = ~match_a & ~match_b

        for idx, sel in ((0, match_a), (1, match_b)):
            nm, nv, na = _update(mean[idx], var[idx], age[idx], m, v, self.theta_v, self.decay)
            mean[idx] = np.where(sel, nm, mean[idx])
            var[idx] = np.where(sel, np.maximum(nv, self.variance_floor), var[idx])
            age[idx] = np.where(sel, na, age[idx])
        mean[1] = np.where(reset_b, m, mean[1])
        var[1] = np.where(reset_b, np.maximum(v, self.variance_floor), var[1])
        age[1] = np.where(reset_b, 1.0, age[1])

        swap = age[1] > age[0]
        for arr in (mean, var, age):
            arr[:, swap] = arr[::-1][:, swap]
        self.swapped_ = swap
        self.n_frames_ += 1
        return self._foreground(img)

    def _foreground(self, img):
        n = self.grid_cell
        ri = np.arange(img.shape[0]) // n
        ci = np.arange(img.shape[1]) // n
        mu = self.mean_[0][np.ix_(ri, ci)]
        sigma = self.var_[0][np.ix_(ri, ci)]
        return (img - mu) ** 2 > self.theta_d * sigma

    def partial_fit(self, frame, warp=None):
        self.step(frame, warp)
        return self

    def fit(self, frames, warps=None):
        self.fit_transform(frames, warps)
        return self

    def transform(self, frames, warps=None):
        """Masks for ``frames``; the model keeps learning while it runs."""
        warps = [None] * len(frames) if warps is None else warps
        if len(warps) != len(frames):
            raise InvalidInputError("need one warp per frame")
        return [self.step(f, w) for f, w in zip(frames, warps)]

    def fit_transform(self, frames, warps=None):
        self.reset()
        return self.transform(frames, warps)

    def blobs(self, mask):
        return extract_blobs(mask, self.min_blob_area)
