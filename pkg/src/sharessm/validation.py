"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np

from .errors import DataError, DimensionError


def check_sequence_array(x, n_channels: int | None = None, name: str = "X") -> np.ndarray:
    """Validate a batch of sequences, shape (n_samples, seq_len, n_channels).

    2-d input is promoted to a single channel.  NaN and inf are rejected.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[..., None]
    if x.ndim != 3:
        raise DimensionError(
            f"{name} must have shape (n_samples, seq_len, n_channels), got {x.shape}")
    if n_channels is not None and x.shape[2] != n_channels:
        raise DimensionError(
            f"{name} has {x.shape[2]} channels, expected {n_channels}")
    if not np.all(np.isfinite(x)):
        raise DataError(f"{name} contains NaN or inf")
    return x


def check_labels(y, n_samples: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_samples:
        raise DimensionError(
            f"y must be 1-d with {n_samples} entries, got shape {y.shape}")
    return y


def check_targets(y, n_samples: int, seq_len: int) -> np.ndarray:
    """Validate regression targets, promoting (n, L) to (n, L, 1)."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2:
        y = y[..., None]
    if y.ndim != 3 or y.shape[0] != n_samples or y.shape[1] != seq_len:
        raise DimensionError(
            f"targets must have shape ({n_samples}, {seq_len}, d), got {y.shape}")
    if not np.all(np.isfinite(y)):
        raise DataError("targets contain NaN or inf")
    return y
