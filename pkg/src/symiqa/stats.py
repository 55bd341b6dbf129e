"""Rank correlation helpers shared by the GP fitness and the evaluation harness."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def pearson(a, b) -> tuple[float, bool]:
    """Pearson correlation and a flag that is True when it is undefined.

    An undefined correlation (either side constant or non-finite) is reported as 0.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        return 0.0, True
    da = a - a.mean()
    db = b - b.mean()
    saa = float(np.dot(da, da))
    sbb = float(np.dot(db, db))
    if saa <= 0.0 or sbb <= 0.0:
        return 0.0, True
    r = float(np.dot(da, db) / np.sqrt(saa * sbb))
    return min(1.0, max(-1.0, r)), False


def srocc_flagged(pred, target) -> tuple[float, bool]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 1:
        raise ValueError(f"expected equal-length 1-D inputs, got {pred.shape} and {target.shape}")
    if pred.size < 3:
        raise ValueError("srocc needs at least 3 samples")
    if not (np.all(np.isfinite(pred)) and np.all(np.isfinite(target))):
        return 0.0, True
    return pearson(rankdata(pred), rankdata(target))


def srocc(pred, target) -> float:
    """Spearman rank-order correlation with mid-ranks for ties.

    Constant input on either side gives 0 (see :func:`srocc_flagged`).
    """
    return srocc_flagged(pred, target)[0]
