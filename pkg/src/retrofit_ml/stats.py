"""Shared numeric helpers (population variance convention throughout)."""
from __future__ import annotations

import numpy as np


def pearson_columns(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Pearson r of every column of ``X`` against ``y``.

    Columns with zero variance, or a zero-variance ``y``, give NaN.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = np.einsum("ij,ij->j", Xc, Xc)
    syy = float(yc @ yc)
    sxy = Xc.T @ yc
    out = np.full(X.shape[1], np.nan)
    # exact constancy check; the centered sum can be a few ulps off zero
    ok = (np.ptp(X, axis=0) > 0) & (np.ptp(y) > 0) & (sxx > 0) & (syy > 0)
    out[ok] = sxy[ok] / np.sqrt(sxx[ok] * syy)
    return np.clip(out, -1.0, 1.0)
