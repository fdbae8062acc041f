"""Input validation helpers used across the package."""

import numpy as np


def as_float_array(values, name="array", ndim=None, shape=None):
    """Coerce to a float64 ndarray, optionally checking ndim or exact shape."""
    arr = np.asarray(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    return arr


def as_readonly_float_array(values, name="array", ndim=None, shape=None):
    """Like :func:`as_float_array` but returns a non-writeable copy."""
    arr = np.array(values, dtype=np.float64)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def check_positive_int(value, name):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_nonnegative_int(value, name):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 0:
        raise ValueError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def check_finite_map(values, name="relevance map"):
    """Reject NaN/Inf, listing the first offending coordinates."""
    arr = np.asarray(values, dtype=np.float64)
    bad = ~np.isfinite(arr)
    if bad.any():
        coords = [tuple(int(c) for c in idx) for idx in np.argwhere(bad)[:8]]
        raise ValueError(f"{name} contains non-finite values at {coords}")
    return arr


def check_grayscale_image(image, name="image"):
    arr = as_float_array(image, name=name, ndim=2)
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    return arr
