"""Small input-validation helpers in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionError


def check_vector(x, m: int | None = None, *, name: str = "allocation vector",
                 nonnegative: bool = False) -> np.ndarray:
    """Return ``x`` as a 1-d float array, checking length and sign."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if m is not None and arr.shape[0] != m:
        raise DimensionError(m, arr.shape[0], name)
    if nonnegative and np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative")
    return arr


def check_points(x, m: int, *, name: str = "allocation") -> np.ndarray:
    """Accept a single point of shape (m,) or a batch of shape (N, m)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.shape[-1] != m or arr.ndim > 2:
        raise DimensionError(m, arr.shape[-1] if arr.ndim else 0, name)
    return arr


def check_matrix(x, shape: tuple[int, int] | None = None, *, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional (agents x resources), got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_costs(costs, m: int | None = None) -> list:
    """Validate a sequence of cost functions sharing one resource count."""
    costs = list(costs)
    if not costs:
        raise ValueError("at least one cost function is required")
    m = costs[0].resource_count if m is None else m
    for i, f in enumerate(costs):
        if f.resource_count != m:
            raise DimensionError(m, f.resource_count, f"cost function {i}")
    return costs
