"""Input checks shared by the estimator classes."""

from __future__ import annotations

import numbers

import numpy as np

from .frontend import MultichannelRecording, SnapshotTensor
from .geometry import MicArray


def check_recording(X, rate=None) -> MultichannelRecording:
    if isinstance(X, MultichannelRecording):
        return X
    if rate is None:
        raise ValueError("a raw sample array needs an explicit sampling rate")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"expected (channels >= 2, samples) array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("recording contains non-finite samples")
    return MultichannelRecording(X, rate)


def check_tensor(X, array: MicArray | None = None, *, allow_projected=False) -> SnapshotTensor:
    """Validate a snapshot tensor against an array's microphone count."""
    if not isinstance(X, SnapshotTensor):
        raise TypeError(
            f"expected a SnapshotTensor (see StftTransformer), got {type(X).__name__}"
        )
    if X.n_bins == 0 or X.n_frames == 0:
        raise ValueError("snapshot tensor is empty")
    if not np.all(np.isfinite(X.data)):
        raise ValueError("snapshot tensor contains non-finite values")
    if array is not None and not allow_projected and X.ambient_dim != array.n_mics:
        raise ValueError(
            f"tensor has {X.ambient_dim} channels but the array has {array.n_mics} microphones"
        )
    return X


def check_count(value, name, minimum=0) -> int:
    if not isinstance(value, numbers.Integral) or isinstance(value, bool):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
