"""Input checks shared by the estimators and the experiment layer."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .params import ModelParams


def check_times(times) -> np.ndarray:
    """Return ``times`` as a finite, non-negative, ascending 1-D float array."""
    if np.ndim(times) > 1:
        raise ValueError("times must be one-dimensional")
    arr = check_array(np.atleast_1d(times), ensure_2d=False, dtype=np.float64, ensure_min_samples=0)
    if arr.size and arr[0] < 0:
        raise ValueError("times must be non-negative")
    if np.any(np.diff(arr) < 0):
        raise ValueError("times must be ascending")
    return arr


def check_params(params) -> ModelParams:
    """Accept ``None`` (defaults), a mapping of overrides or a ModelParams."""
    if params is None:
        return ModelParams()
    if isinstance(params, ModelParams):
        return params
    if isinstance(params, dict):
        return ModelParams(**params)
    raise TypeError(f"expected ModelParams, dict or None, got {type(params).__name__}")
