"""Projection onto the nonnegative m-sparse set {v >= 0, ||v||_0 <= m}."""

import numpy as np

__all__ = ["prox_m_sparse_nonneg"]


def prox_m_sparse_nonneg(v, m: int) -> np.ndarray:
    """Keep the ``m`` largest positive entries of ``v``, zero the rest.

    When more than ``m`` entries are positive, entries tied at the cut-off
    value are kept in order of increasing index. Pruned entries are exact
    zeros; kept entries are copied bit-for-bit.
    """
    v = np.asarray(v, dtype=float)
    m = int(m)
    if m < 1:
        raise ValueError(f"sparsity budget must be >= 1, got {m}")
    h = np.where(v > 0.0, v, 0.0)
    positive = np.flatnonzero(h)
    if positive.size <= m:
        return h
    vals = h[positive]
    cut = np.partition(vals, vals.size - m)[vals.size - m]
    above = positive[vals > cut]
    tied = positive[vals == cut][: m - above.size]
    out = np.zeros_like(h)
    keep = np.concatenate((above, tied))
    out[keep] = h[keep]
    return out
