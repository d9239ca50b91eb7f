"""Input checks shared by the estimator, trainer entry points and CLI."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from .data import DIM, N_FEATURES


def check_points(X, n_features: int | None = N_FEATURES) -> np.ndarray:
    """Float64 array of shape (N, n_features, 2), finite, at least one point."""
    X = check_array(X, allow_nd=True, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2 and X.shape[1] == (n_features or N_FEATURES) * DIM:
        X = X.reshape(len(X), -1, DIM)
    if X.ndim != 3 or X.shape[2] != DIM:
        raise ValueError(f"expected points of shape (N, n_features, {DIM}), got {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features per point, got {X.shape[1]}")
    if X.shape[1] < 1:
        raise ValueError("points need at least one feature")
    return X


def check_labels(y, n: int | None = None) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"labels must be 1-D, got shape {y.shape}")
    if n is not None and len(y) != n:
        raise ValueError(f"got {len(y)} labels for {n} points")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    return y.astype(np.int64)


def check_seed(seed) -> int:
    if isinstance(seed, (bool, np.bool_)) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)
