"""Deterministic low-discrepancy sample generation."""
from __future__ import annotations

import numpy as np
from scipy.stats import qmc


def box_array(box, dim: int) -> np.ndarray:
    """Normalize ``box`` to a (dim, 2) array of [lo, hi] rows.

    Accepts a single [lo, hi] pair (applied to every coordinate) or one pair
    per coordinate.
    """
    arr = np.asarray(box, dtype=float)
    if arr.shape == (2,):
        arr = np.tile(arr, (dim, 1))
    if arr.shape != (dim, 2):
        raise ValueError(f"box must be [lo, hi] or {dim} such pairs, got shape {arr.shape}")
    return arr


def halton(count: int, box, dim: int, seed: int = 0) -> np.ndarray:
    """``count`` scrambled-Halton points in ``box``; identical for equal seeds.

    Degenerate intervals (lo == hi) pin that coordinate.
    """
    b = box_array(box, dim)
    if count <= 0:
        return np.empty((0, dim))
    unit = qmc.Halton(d=dim, scramble=True, seed=seed).random(count)
    return b[:, 0] + unit * (b[:, 1] - b[:, 0])
