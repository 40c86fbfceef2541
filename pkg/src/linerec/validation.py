"""Input validation helpers shared by the estimator and pipeline entry points."""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatchError


def as_image_batch(X, height: int = 32, width: int = 280) -> np.ndarray:
    """Coerce images to a float32 (N, 3, H, W) batch normalized to [-1, 1].

    Accepts uint8 channel-last (N, H, W, 3) arrays as produced by the
    synthesizer/store, or already normalized float channel-first batches.
    """
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[None]
    if X.ndim != 4:
        raise ShapeMismatchError(f"expected a 4-d image batch, got shape {X.shape}")
    if X.shape[1:] == (height, width, 3):
        x = X.astype(np.float32) / 255.0
        return ((x - 0.5) / 0.5).transpose(0, 3, 1, 2)
    if X.shape[1:] == (3, height, width):
        x = np.asarray(X, dtype=np.float32)
        if x.size and (x.min() < -1.001 or x.max() > 1.001):
            raise ShapeMismatchError(
                "float image batches must already be normalized to [-1, 1]"
            )
        return x
    raise ShapeMismatchError(
        f"expected (N, {height}, {width}, 3) uint8 or (N, 3, {height}, {width}) "
        f"float images, got shape {X.shape}"
    )


def as_uint8_batch(X, height: int = 32, width: int = 280) -> np.ndarray:
    """Coerce images to uint8 channel-last (N, H, W, 3), the training layout."""
    X = np.asarray(X)
    if X.ndim == 3:
        X = X[None]
    if X.ndim != 4:
        raise ShapeMismatchError(f"expected a 4-d image batch, got shape {X.shape}")
    if X.shape[1:] == (height, width, 3):
        return X.astype(np.uint8)
    if X.shape[1:] == (3, height, width):
        x = np.asarray(X, dtype=np.float32)
        return np.round((x * 0.5 + 0.5) * 255.0).clip(0, 255).astype(
            np.uint8
        ).transpose(0, 2, 3, 1)
    raise ShapeMismatchError(
        f"expected (N, {height}, {width}, 3) or (N, 3, {height}, {width}) images, "
        f"got shape {X.shape}"
    )


def check_labels(y) -> list[str]:
    labels = [str(v) for v in y]
    if any(len(label) == 0 for label in labels):
        raise ValueError("labels must be non-empty strings")
    return labels
