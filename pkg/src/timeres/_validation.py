"""Input validation helpers shared by the estimators and free functions."""

from __future__ import annotations

import numpy as np


class ResolutionError(ValueError):
    """A grid is too coarse (or too short) for the feature placed on it."""


class DimensionError(ValueError):
    """Array shapes or pattern sizes do not agree."""


def check_square(m, name="matrix"):
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def check_unitary(m, atol=1e-9, name="matrix"):
    a = check_square(m, name)
    err = np.max(np.abs(a @ a.conj().T - np.eye(a.shape[0])))
    if err > atol:
        raise ValueError(f"{name} is not unitary (max |TT^dag - I| = {err:.3g})")
    return a


def check_probability(x, name="value"):
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")
    return x


def check_positive(x, name="value"):
    x = float(x)
    if not x > 0:
        raise ValueError(f"{name} must be > 0, got {x}")
    return x


def check_pattern(pattern, n_modes=None, name="pattern"):
    """Return a collision-free mode pattern as a tuple of ints."""
    p = tuple(int(i) for i in pattern)
    if len(set(p)) != len(p):
        raise ValueError(f"{name} has repeated modes: {p}")
    if n_modes is not None and any(i < 0 or i >= n_modes for i in p):
        raise ValueError(f"{name} {p} out of range for {n_modes} modes")
    return p
