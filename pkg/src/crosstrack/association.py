"""Greedy global-minimum assignment over a gated cost matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .core import DEFAULT_SENTINEL
from .geometry import iou_matrix


@dataclass(frozen=True)
class Assignment:
    """One-to-one matches plus the leftovers on each side."""

    matches: Tuple[Tuple[int, int, float], ...]
    unmatched_rows: Tuple[int, ...]
    unmatched_cols: Tuple[int, ...]


def greedy_match(cost: np.ndarray, sentinel: float = DEFAULT_SENTINEL) -> Assignment:
    """Repeatedly commit the globally smallest admissible entry, then delete
    its row and column.  Entries >= sentinel are inadmissible.

    Ties break on (row, column) ascending, which argmin's row-major scan
    gives for free, so results are deterministic.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2D, got shape {cost.shape}")
    n_rows, n_cols = cost.shape
    matches = []
    if n_rows and n_cols:
        work = cost.copy()
        work[work >= sentinel] = np.inf
        for _ in range(min(n_rows, n_cols)):
            flat = int(np.argmin(work))
            r, c = divmod(flat, n_cols)
            if not np.isfinite(work[r, c]):
                break
            matches.append((r, c, float(cost[r, c])))
            work[r, :] = np.inf
            work[:, c] = np.inf
    used_rows = {r for r, _, _ in matches}
    used_cols = {c for _, c, _ in matches}
    return Assignment(
        tuple(matches),
        tuple(r for r in range(n_rows) if r not in used_rows),
        tuple(c for c in range(n_cols) if c not in used_cols),
    )


def greedy_match_iou(rows: Sequence, cols: Sequence, theta_iou: float) -> Assignment:
    """Greedy assignment on cost 1 - IoU, keeping only pairs with
    IoU >= theta_iou."""
    iou = iou_matrix(list(rows), list(cols))
    cost = 1.0 - iou
    cost[iou < theta_iou] = DEFAULT_SENTINEL
    return greedy_match(cost, DEFAULT_SENTINEL)
