"""Small input-validation helpers shared across the package.

These mirror the checks sklearn's ``check_array`` performs, but stay
lightweight: everything here is a plain float ndarray in, ndarray out,
with errors that name the offending argument.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_float_array",
    "check_finite",
    "check_in_open_interval",
    "check_positive",
    "check_unit_interval",
]


def as_float_array(x, name, ndim=1, min_len=0):
    """Coerce ``x`` to a float64 ndarray of dimension ``ndim``.

    Raises ValueError naming ``name`` on wrong dimension or length.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got ndim={arr.ndim}")
    if arr.shape[0] < min_len:
        raise ValueError(f"{name} needs at least {min_len} entries, got {arr.shape[0]}")
    return arr


def check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(np.ravel(arr)))[0])
        raise ValueError(f"{name} contains a non-finite entry (first at flat index {bad})")
    return arr


def check_positive(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value


def check_in_open_interval(value, name, lo=-1.0, hi=1.0):
    if not lo < value < hi:
        raise ValueError(f"{name} must lie in ({lo}, {hi}), got {value}")
    return value


def check_unit_interval(value, name):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value
