"""Small argument-checking helpers shared across modules."""

from __future__ import annotations

import numpy as np

PROBABILITY_TOL = 1e-6


def check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_probability_rows(arr, *, name: str = "predictions") -> np.ndarray:
    """Validate a 2-D array whose rows are probability vectors.

    Rows must be nonnegative and sum to 1 within ``PROBABILITY_TOL``.
    """
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {arr.shape}")
    check_finite(arr, name)
    if np.any(arr < -PROBABILITY_TOL):
        raise ValueError(f"{name} has negative entries")
    sums = arr.sum(axis=1)
    bad = np.where(np.abs(sums - 1.0) > PROBABILITY_TOL)[0]
    if bad.size:
        raise ValueError(
            f"{name} row {bad[0]} sums to {sums[bad[0]]:.8f}, expected 1"
        )
    return arr


def check_node_id(v, node_count: int) -> int:
    v = int(v)
    if not 0 <= v < node_count:
        raise ValueError(f"node id {v} out of range [0, {node_count})")
    return v


def check_node_ids(ids, node_count: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=int)
    if ids.ndim != 1:
        raise ValueError(f"node ids must be 1-D, got shape {ids.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= node_count):
        raise ValueError(f"node ids outside [0, {node_count})")
    return ids


def check_seed(seed) -> int:
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    return seed
