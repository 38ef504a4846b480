"""Optimal one-to-one matching between predicted and ground-truth instances.

The solver is scipy's linear sum assignment; rectangular matrices leave
the surplus side unmatched. Among equally optimal assignments the
lexicographically smallest pair list is returned so rewards are
reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

# Relative slack when testing whether a partial assignment can still reach
# the optimal total; absorbs summation-order rounding, nothing more.
_TIE_RTOL = 1e-9


@dataclass(frozen=True)
class Matching:
    """Injective row->col pairs of size min(M, N), ascending by row."""

    pairs: tuple[tuple[int, int], ...]
    total_cost: float


def _as_cost_matrix(cost) -> np.ndarray:
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2:
        raise ValueError(f"cost matrix must be 2-dimensional, got shape {c.shape}")
    if c.shape[0] < 1 or c.shape[1] < 1:
        raise ValueError(f"cost matrix must be at least 1x1, got shape {c.shape}")
    if not np.isfinite(c).all():
        raise ValueError("cost matrix entries must be finite")
    return c


def _optimal_total(c: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(c)
    return float(c[rows, cols].sum())


def hungarian(cost) -> Matching:
    """Minimum-cost injective assignment of size min(M, N).

    Ties between equally optimal assignments resolve to the
    lexicographically smallest pair list: rows are matched greedily in
    ascending order, each taking the smallest column consistent with
    global optimality.
    """
    c = _as_cost_matrix(cost)
    m, n = c.shape
    if m == 1:
        col = min(range(n), key=lambda j: (c[0, j], j))
        return Matching(pairs=((0, col),), total_cost=float(c[0, col]))
    if n == 1:
        row = min(range(m), key=lambda i: (c[i, 0], i))
        return Matching(pairs=((row, 0),), total_cost=float(c[row, 0]))
    size = min(m, n)
    target = _optimal_total(c)
    tol = _TIE_RTOL * max(1.0, abs(target))

    pairs: list[tuple[int, int]] = []
    avail = list(range(n))
    acc = 0.0
    for row in range(m):
        if len(pairs) == size:
            break
        need_after = size - len(pairs) - 1
        rows_after = list(range(row + 1, m))
        if need_after > min(len(rows_after), len(avail) - 1):
            continue  # matching this row cannot be completed; leave it out
        for pos, col in enumerate(avail):
            if need_after == 0:
                rest = 0.0
            else:
                cols_after = avail[:pos] + avail[pos + 1 :]
                sub = c[np.ix_(rows_after, cols_after)]
                ri, ci = linear_sum_assignment(sub)
                rest = float(sub[ri, ci].sum())
            if acc + c[row, col] + rest <= target + tol:
                pairs.append((row, col))
                acc += float(c[row, col])
                avail.pop(pos)
                break
        # No column worked: every optimal assignment leaves this row out.
    return Matching(pairs=tuple(pairs), total_cost=acc)
