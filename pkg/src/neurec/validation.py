"""Small argument-checking helpers shared across modules."""

import numpy as np


def check_fraction(name, value, include_zero=True, include_one=False):
    lo_ok = value >= 0.0 if include_zero else value > 0.0
    hi_ok = value <= 1.0 if include_one else value < 1.0
    if not (lo_ok and hi_ok):
        lo = "[0" if include_zero else "(0"
        hi = "1]" if include_one else "1)"
        raise ValueError(f"{name} must lie in {lo}, {hi}, got {value!r}")
    return float(value)


def check_positive_int(name, value, minimum=1):
    if not isinstance(value, (int, np.integer)) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_nonnegative(name, value):
    if not np.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be a finite value >= 0, got {value!r}")
    return float(value)


def check_index(name, value, size):
    if not 0 <= value < size:
        raise IndexError(f"{name} must lie in [0, {size}), got {value!r}")
    return int(value)


def check_finite(name, array):
    array = np.asarray(array)
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite values")
    return array


def check_choice(name, value, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {sorted(choices)}, got {value!r}")
    return value
