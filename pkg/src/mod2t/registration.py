"""Inter-frame camera motion estimation (ECC alignment over an image pyramid)."""

from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

from mod2t.core import AffineTransform, BoundingBox, InvalidInputError, apply_transform
from mod2t.validation import check_gray_image, check_same_shape

MIN_SIZE = 32
# Coarse levels smaller than this carry too little texture for ECC.
_MIN_LEVEL_SIZE = 24


@dataclass(frozen=True)
class RegistrationConfig:
    pyramid_levels: int = 3
    max_iterations: int = 50
    convergence_eps: float = 1e-4
    model: str = "affine"
    robust_rounds: int = 2
    refine_iterations: int = 15

    def __post_init__(self):
        if self.robust_rounds < 0:
            raise InvalidInputError("robust_rounds must be >= 0")
        if self.refine_iterations < 0:
            raise InvalidInputError("refine_iterations must be >= 0")
        if self.pyramid_levels < 1:
            raise InvalidInputError("pyramid_levels must be >= 1")
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")
        if not self.convergence_eps > 0:
            raise InvalidInputError("convergence_eps must be > 0")
        if self.model not in ("translation", "affine"):
            raise InvalidInputError(f"unknown motion model {self.model!r}")


def _pyramid(img, levels):
    out = [img]
    for _ in range(levels - 1):
        h, w = out[-1].shape
        if min(h, w) // 2 < _MIN_LEVEL_SIZE:
            break
        out.append(cv2.pyrDown(out[-1]))
    return out[::-1]


def _ecc_pyramid(prev, curr, mask, cfg):
    motion = cv2.MOTION_AFFINE if cfg.model == "affine" else cv2.MOTION_TRANSLATION
    criteria = (cv2.TERM_CRITERIA_EPS | cv2.TERM_CRITERIA_COUNT, cfg.max_iterations, cfg.convergence_eps)
    levels_prev = _pyramid(prev, cfg.pyramid_levels)
    levels_curr = _pyramid(curr, cfg.pyramid_levels)
    warp = np.eye(2, 3, dtype=np.float32)
    converged = True
    for k, (p, c) in enumerate(zip(levels_prev, levels_curr)):
        if k > 0:
            warp[:, 2] *= 2.0
        m = None
        if mask is not None:
            m = cv2.resize(mask, (c.shape[1], c.shape[0]), interpolation=cv2.INTER_NEAREST)
        try:
            _, refined = cv2.findTransformECC(p, c, warp.copy(), motion, criteria, m, 1)
        except cv2.error:
            converged = False
            continue
        if not np.all(np.isfinite(refined)):
            converged = False
            continue
        warp = refined
    return warp, converged


def _consistent_pixels(prev, curr, warp):
    """Mask (in ``curr`` coordinates) of pixels the warp explains; independent motion is cut out."""
    h, w = curr.shape
    predicted = cv2.warpAffine(prev, warp, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REFLECT)
    r = np.abs(curr - predicted)
    med = float(np.median(r))
    thr = max(med + 4.0 * 1.4826 * float(np.median(np.abs(r - med))), 8.0)
    outlier = cv2.dilate((r > thr).astype(np.uint8), np.ones((7, 7), np.uint8))
    keep = (outlier == 0).astype(np.uint8)
    # too little left to align on: fall back to the whole frame
    return keep if keep.mean() > 0.25 else None


def _refine(prev, curr, warp, mask, cfg):
    """Gauss-Newton polish of an ECC warp with exact (unquantized) cubic-spline sampling.

    Minimises ``sum (curr(W x) - g prev(x) - b)^2`` over the kept pixels, with
    gain ``g`` and offset ``b`` absorbing global brightness change. The linear
    part is parametrised about the frame center to keep the system well
    conditioned. Returns ``warp`` unchanged if the polish does not help.
    """
    h, w = prev.shape
    coeffs = ndimage.spline_filter(curr.astype(np.float64), order=3, mode="mirror")
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    c = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    u, v = (xs - c[0]).ravel(), (ys - c[1]).ravel()
    p = prev.astype(np.float64).ravel()
    A = warp[:, :2].astype(np.float64)
    s = warp[:, 2].astype(np.float64) + A @ c  # image of the center
    affine = cfg.model == "affine"

    def sample(A, s):
        X = A[0, 0] * u + A[0, 1] * v + s[0]
        Y = A[1, 0] * u + A[1, 1] * v + s[1]
        img = ndimage.map_coordinates(coeffs, [Y, X], order=3, mode="mirror", prefilter=False)
        ok = (X >= 1) & (X <= w - 2) & (Y >= 1) & (Y <= h - 2)
        if mask is not None:
            ok &= mask[np.clip(np.rint(Y), 0, h - 1).astype(int), np.clip(np.rint(X), 0, w - 1).astype(int)] > 0
        return img, ok

    def cost(A, s):
        img, ok = sample(A, s)
        if ok.sum() < 0.25 * ok.size:
            return np.inf, None
        P = np.column_stack([p[ok], np.ones(ok.sum())])
        gb, *_ = np.linalg.lstsq(P, img[ok], rcond=None)
        r = img[ok] - P @ gb
        return float(r @ r) / ok.sum(), (img, ok, gb)

    best, state = cost(A, s)
    start = best
    for _ in range(cfg.refine_iterations):
        if state is None:
            break
        img, ok, (g, b) = state
        gy, gx = np.gradient(img.reshape(h, w))
        # chain rule: d curr(W x) / dx = grad(curr) A, so grad(curr) = grad A^-1
        Ai = np.linalg.inv(A)
        ix = (gx.ravel() * Ai[0, 0] + gy.ravel() * Ai[1, 0])[ok]
        iy = (gx.ravel() * Ai[0, 1] + gy.ravel() * Ai[1, 1])[ok]
        cols = [ix, iy]
        if affine:
            cols += [ix * u[ok], ix * v[ok], iy * u[ok], iy * v[ok]]
        J = np.column_stack(cols + [-p[ok], -np.ones(ok.sum())])
        e = img[ok] - g * p[ok] - b
        d, *_ = np.linalg.lstsq(J, -e, rcond=None)
        s_new = s + d[:2]
        A_new = A + d[2:6].reshape(2, 2) if affine else A
        new, new_state = cost(A_new, s_new)
        if not new < best:
            break
        A, s, best, state = A_new, s_new, new, new_state
        if np.abs(d[:2]).max() < 1e-5 and (not affine or np.abs(d[2:6]).max() < 1e-8):
            break
    if not best < start:
        return warp
    out = np.zeros((2, 3))
    out[:, :2] = A
    out[:, 2] = s - A @ c
    return out


def estimate_camera_motion(prev, curr, cfg: RegistrationConfig = RegistrationConfig()) -> AffineTransform:
    """Estimate the affine map taking ``prev`` pixel coordinates to ``curr`` coordinates.

    Content at ``(x, y)`` in ``prev`` is found near ``T(x, y)`` in ``curr``. The
    warp is refined coarse to fine with ECC. Each robust round then masks out
    pixels the current warp fails to explain (independently moving objects)
    and re-estimates from the remaining background. If ECC fails at some level
    the best estimate so far is returned with ``converged=False``.
    """
    prev = check_gray_image(prev, "prev", MIN_SIZE)
    curr = check_gray_image(curr, "curr", MIN_SIZE)
    check_same_shape(prev, curr)
    if np.array_equal(prev, curr):
        return AffineTransform.identity()
    p32, c32 = prev.astype(np.float32), curr.astype(np.float32)
    warp, converged = _ecc_pyramid(p32, c32, None, cfg)
    for _ in range(cfg.robust_rounds):
        mask = _consistent_pixels(p32, c32, warp)
        if mask is None or mask.all():
            break
        warp, converged = _ecc_pyramid(p32, c32, mask, cfg)
    warp = warp.astype(np.float64)
    # translation model leaves the linear part untouched, keep it exact
    if cfg.model == "translation":
        warp[:, :2] = np.eye(2)
    if cfg.refine_iterations:
        mask = _consistent_pixels(p32, c32, warp.astype(np.float32)) if cfg.robust_rounds else None
        warp = _refine(prev, curr, warp, mask, cfg)
    try:
        return AffineTransform.from_matrix(warp, converged)
    except InvalidInputError:
        return AffineTransform(converged=False)


def stabilize_box(box: BoundingBox, t: AffineTransform) -> BoundingBox:
    """Move the box center through ``t``; width and height are kept."""
    cx, cy = apply_transform(t, box.center)
    return box.with_center(cx, cy)


def chain(transforms) -> AffineTransform:
    """Compose per-step transforms applied in the given order."""
    out = AffineTransform.identity()
    for t in transforms:
        out = t.compose(out)
    return out
