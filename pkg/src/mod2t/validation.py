"""Input checks shared by the estimators."""

import numbers

import numpy as np

from mod2t.core import InvalidInputError


def check_gray_image(image, name="image", min_size=1):
    """Return ``image`` as a 2-D float64 array of intensities.

    Accepts any 2-D array-like (uint8 or float). Values must be finite; they
    are not clipped to [0, 255].
    """
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D grayscale array, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise InvalidInputError(f"{name} must be at least {min_size}x{min_size}, got {arr.shape}")
    arr = arr.astype(np.float64, copy=False)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b, names=("prev", "curr")):
    if a.shape != b.shape:
        raise InvalidInputError(f"{names[0]} shape {a.shape} differs from {names[1]} shape {b.shape}")


def check_mask(mask, shape=None):
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise InvalidInputError(f"mask must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise InvalidInputError(f"mask shape {arr.shape} does not match frame shape {tuple(shape)}")
    return arr.astype(bool, copy=False)


def check_interval(value, name, low, high, closed=(True, True)):
    """Range check for scalar hyper-parameters; returns ``float(value)``."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise InvalidInputError(f"{name} must be a real number, got {value!r}")
    v = float(value)
    lo_ok = v >= low if closed[0] else v > low
    hi_ok = v <= high if closed[1] else v < high
    if not (lo_ok and hi_ok):
        lb = "[" if closed[0] else "("
        rb = "]" if closed[1] else ")"
        raise InvalidInputError(f"{name}={value} outside {lb}{low}, {high}{rb}")
    return v


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise InvalidInputError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
