"""Helpers for named tensor collections (dict[str, np.ndarray]).

Model parameters, gradients, optimizer moments, and Fisher importances all
share one layout: an ordered mapping from tensor name to a float64 array.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError


def named_zeros_like(named: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in named.items()}


def named_copy(named: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in named.items()}


def named_add(a: dict[str, np.ndarray], b: dict[str, np.ndarray], scale: float = 1.0):
    """a += scale * b, in place on a."""
    check_same_layout(a, b)
    for k in a:
        a[k] += scale * b[k]
    return a


def named_norm(named: dict[str, np.ndarray]) -> float:
    """Global l2 norm over all entries, flattened and concatenated."""
    total = sum(float(np.sum(v * v)) for v in named.values())
    return math.sqrt(total)


def check_same_layout(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> None:
    if a.keys() != b.keys():
        raise DimensionError(
            f"tensor name sets differ: {sorted(a.keys())} vs {sorted(b.keys())}"
        )
    for k in a:
        if a[k].shape != b[k].shape:
            raise DimensionError(f"shape mismatch for {k!r}: {a[k].shape} vs {b[k].shape}")


def named_allfinite(named: dict[str, np.ndarray]) -> str | None:
    """Name of the first non-finite tensor, or None when all finite."""
    for k, v in named.items():
        if not np.all(np.isfinite(v)):
            return k
    return None
