"""Input validation for homodyne sample arrays."""
from __future__ import annotations

import math

import numpy as np
from sklearn.utils import check_array


def check_samples(X, min_samples=1):
    """Validate homodyne data and return ``(x, phi)``.

    ``X`` is an ``(N, 2)`` array of ``(x, phi)`` pairs or any object with a
    ``samples`` method returning one (for instance a ``HomodyneDataset``).
    Phases must lie in ``[0, pi)``.
    """
    if hasattr(X, "samples") and callable(X.samples):
        X = X.samples()
    X = check_array(X, dtype=np.float64, ensure_min_samples=min_samples)
    if X.shape[1] != 2:
        raise ValueError(f"expected samples with 2 columns (x, phi), got shape {X.shape}")
    phi = X[:, 1]
    if np.any(phi < 0) or np.any(phi >= math.pi):
        raise ValueError("phases must lie in [0, pi)")
    return X[:, 0], phi


def check_blocks(n_samples, n_blocks):
    if n_blocks is None:
        return None
    n_blocks = int(n_blocks)
    if n_blocks < 1:
        raise ValueError("n_blocks must be positive")
    if n_samples % n_blocks:
        raise ValueError(f"{n_samples} samples cannot be split into {n_blocks} equal blocks")
    return n_blocks
