"""Minimum-cost assignment for small dense cost matrices.

Neighborhood matching solves hundreds of thousands of tiny assignment
problems per synthesis run, so this is a jitted shortest-augmenting-path
implementation (the classical O(n^3) Hungarian scheme with potentials)
rather than a call into a general-purpose solver.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _solve(cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Min-cost assignment of all rows; requires rows <= cols.

    Returns (total cost, row_to_col).  Potentials are maintained so each
    augmentation is a shortest path in the reduced graph.
    """
    m, n = cost.shape
    u = np.zeros(m + 1)
    v = np.zeros(n + 1)
    match = np.zeros(n + 1, dtype=np.int64)  # 1-based row matched to col
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, m + 1):
        match[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=np.uint8)
        while True:
            used[j0] = 1
            i0 = match[j0]
            delta = np.inf
            j1 = -1
            for j in range(1, n + 1):
                if used[j] == 0:
                    cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j] == 1:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.full(m, -1, dtype=np.int64)
    total = 0.0
    for j in range(1, n + 1):
        if match[j] > 0:
            row_to_col[match[j] - 1] = j - 1
            total += cost[match[j] - 1, j - 1]
    return total, row_to_col


@njit(cache=True)
def assignment(cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Min-cost matching covering the smaller side of a rectangular matrix.

    Returns (total cost, row_to_col with -1 for unmatched rows).
    """
    m, n = cost.shape
    if m == 0 or n == 0:
        return 0.0, np.full(m, -1, dtype=np.int64)
    if m <= n:
        return _solve(cost)
    total, col_to_row = _solve(cost.T.copy())
    row_to_col = np.full(m, -1, dtype=np.int64)
    for c in range(n):
        r = col_to_row[c]
        if r >= 0:
            row_to_col[r] = c
    return total, row_to_col


def min_cost_assignment(cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Python-facing wrapper around :func:`assignment`."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost must be 2-D, got shape {cost.shape}")
    return assignment(cost)
