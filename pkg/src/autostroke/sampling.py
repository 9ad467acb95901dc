"""Variable-radius Poisson-disk sampling over a pixel mask.

Dart throwing in the style of Bridson: an acceleration grid with cell size
min R / sqrt(2), an active list of frontier samples, and 30 candidate
attempts per visit before a seed retires.  A candidate c is accepted iff
|c - s| >= min(R(c), R(s)) for every accepted sample s, which also means the
grid holds at most one sample per cell.  Disconnected masks are covered by
sweeping a shuffled pixel order for fresh seeds whenever the frontier dies.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _kernel(
    mask: np.ndarray,
    rmap: np.ndarray,
    order: np.ndarray,
    seed: int,
    attempts: int,
) -> np.ndarray:
    np.random.seed(seed)
    h, w = mask.shape
    total = order.shape[0]
    if total == 0:
        return np.empty((0, 2), dtype=np.float64)

    rmin = 1e30
    for t in range(total):
        r = rmap[order[t, 0], order[t, 1]]
        if r < rmin:
            rmin = r
    rmin = max(rmin, 1e-3)
    cell = rmin / math.sqrt(2.0)
    gw = int(w / cell) + 1
    gh = int(h / cell) + 1
    grid = np.full((gh, gw), -1, dtype=np.int64)

    xs = np.empty(total, dtype=np.float64)
    ys = np.empty(total, dtype=np.float64)
    rs = np.empty(total, dtype=np.float64)
    count = 0
    active = np.empty(total, dtype=np.int64)
    n_active = 0

    def _ok(cx, cy, rc):
        reach = int(rc / cell) + 1
        gx = int(cx / cell)
        gy = int(cy / cell)
        y0 = max(gy - reach, 0)
        y1 = min(gy + reach, gh - 1)
        x0 = max(gx - reach, 0)
        x1 = min(gx + reach, gw - 1)
        for yy in range(y0, y1 + 1):
            for xx in range(x0, x1 + 1):
                s = grid[yy, xx]
                if s >= 0:
                    dx = cx - xs[s]
                    dy = cy - ys[s]
                    limit = min(rc, rs[s])
                    if dx * dx + dy * dy < limit * limit:
                        return False
        return True

    ptr = 0
    while True:
        # hunt for a fresh seed along the shuffled pixel order
        seeded = False
        while ptr < total:
            py = order[ptr, 0]
            px = order[ptr, 1]
            ptr += 1
            cx = px + np.random.random()
            cy = py + np.random.random()
            rc = rmap[py, px]
            if _ok(cx, cy, rc):
                xs[count] = cx
                ys[count] = cy
                rs[count] = rc
                grid[int(cy / cell), int(cx / cell)] = count
                active[n_active] = count
                n_active += 1
                count += 1
                seeded = True
                break
        if not seeded:
            break

        while n_active > 0:
            ai = np.random.randint(0, n_active)
            si = active[ai]
            bx = xs[si]
            by = ys[si]
            rb = rs[si]
            found = False
            for _ in range(attempts):
                rr = rb * (1.0 + np.random.random())
                th = 2.0 * math.pi * np.random.random()
                cx = bx + rr * math.cos(th)
                cy = by + rr * math.sin(th)
                ix = int(math.floor(cx))
                iy = int(math.floor(cy))
                if ix < 0 or ix >= w or iy < 0 or iy >= h:
                    continue
                if not mask[iy, ix]:
                    continue
                rc = rmap[iy, ix]
                if _ok(cx, cy, rc):
                    xs[count] = cx
                    ys[count] = cy
                    rs[count] = rc
                    grid[int(cy / cell), int(cx / cell)] = count
                    active[n_active] = count
                    n_active += 1
                    count += 1
                    found = True
                    break
            if not found:
                active[ai] = active[n_active - 1]
                n_active -= 1

    out = np.empty((count, 2), dtype=np.float64)
    for i in range(count):
        out[i, 0] = xs[i]
        out[i, 1] = ys[i]
    return out


def poisson_disk_sample(
    mask: np.ndarray,
    radius_map: np.ndarray,
    seed: int = 0,
    attempts: int = 30,
) -> np.ndarray:
    """Sample (x, y) positions covering ``mask`` at spacing ``radius_map``.

    Deterministic for a given seed.  Returns an (N, 2) float array; N is 0
    for an empty mask.
    """
    mask = np.ascontiguousarray(mask, dtype=bool)
    rmap = np.ascontiguousarray(radius_map, dtype=np.float64)
    if mask.shape != rmap.shape:
        raise ValueError(f"mask {mask.shape} and radius map {rmap.shape} differ")
    pixels = np.argwhere(mask)
    if len(pixels) == 0:
        return np.empty((0, 2), dtype=np.float64)
    rng = np.random.default_rng(seed)
    order = np.ascontiguousarray(pixels[rng.permutation(len(pixels))])
    return _kernel(mask, rmap, order, int(seed) & 0x7FFFFFFF, attempts)
