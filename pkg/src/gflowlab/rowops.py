"""Vectorized operations over ragged CSR rows (per-state edge slices).

Both kernel backends and the oracles share these; they avoid per-row Python
loops via ``reduceat`` over the non-empty rows.
"""

from __future__ import annotations

import numpy as np


def row_counts(ptr: np.ndarray) -> np.ndarray:
    return np.diff(ptr)


def row_logsumexp(vals: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Per-row logsumexp; empty rows yield -inf."""
    counts = np.diff(ptr)
    out = np.full(len(counts), -np.inf)
    ne = counts > 0
    if not ne.any():
        return out
    starts = ptr[:-1][ne]
    rmax = np.maximum.reduceat(vals, starts)
    rmax = np.where(np.isfinite(rmax), rmax, 0.0)  # all -inf rows
    shifted = np.exp(vals - np.repeat(rmax, counts[ne]))
    rsum = np.add.reduceat(shifted, starts)
    out[ne] = rmax + np.log(rsum)
    return out


def row_log_softmax(vals: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Log-softmax within each row (max-subtracted for stability)."""
    lse = row_logsumexp(vals, ptr)
    return vals - np.repeat(lse, np.diff(ptr))


def row_softmax(vals: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    return np.exp(row_log_softmax(vals, ptr))


def row_sums(vals: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    counts = np.diff(ptr)
    out = np.zeros(len(counts))
    ne = counts > 0
    if ne.any():
        out[ne] = np.add.reduceat(vals, ptr[:-1][ne])
    return out


def expand_rows(per_row: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Broadcast one value per row onto its edges."""
    return np.repeat(per_row, np.diff(ptr))


def segment_sums(vals: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Sum of ``vals`` within each [ptr[k], ptr[k+1]) segment."""
    return row_sums(vals, ptr)
