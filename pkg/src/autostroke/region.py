"""Target region inference and editing.

The color route segments the reference with a graph cut between two Gaussian
mixture color models seeded from the exemplar (foreground) and the image
border (background).  The semantic route selects the label-map class under
the exemplar.  Both available means both apply: the final mask is their
intersection, reduced to the connected component nearest the newest stroke.
Masks travel over the wire as base64 run-length encodings.
"""

from __future__ import annotations

import base64
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from PIL import Image, ImageDraw
from scipy import ndimage, sparse
from scipy.sparse.csgraph import breadth_first_order, maximum_flow

from .errors import PipelineCancelled, RegionEmptyError
from .grouping import Exemplar
from .imagery import GROUP_PATCH, ReferenceImage
from .model import summarize

GCUT_GAMMA = 50.0
GCUT_COMPONENTS = 5
GCUT_ITERATIONS = 3
GCUT_MAX_SIDE = 256  # the cut runs at most at this resolution
GCUT_FIT_SAMPLES = 8192

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass
class RegionMask:
    """Boolean pixel mask plus how it came to be ("inferred" or "edited")."""

    mask: np.ndarray  # (H, W) bool
    provenance: str = "inferred"

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape  # type: ignore[return-value]

    @property
    def area(self) -> int:
        return int(self.mask.sum())


def mask_to_rle(mask: np.ndarray) -> dict:
    """Encode a boolean mask as {"w", "h", "rle"}.

    The encoding is alternating run lengths over the row-major flattened
    mask, starting with a run of zeros (possibly empty), as little-endian
    uint32, base64-encoded.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    flat = mask.ravel().astype(np.uint8)
    if flat.size == 0:
        runs = np.zeros(0, dtype=np.uint32)
    else:
        change = np.nonzero(np.diff(flat))[0] + 1
        bounds = np.concatenate([[0], change, [flat.size]])
        runs = np.diff(bounds)
        if flat[0] == 1:
            runs = np.concatenate([[0], runs])
        runs = runs.astype(np.uint32)
    payload = base64.b64encode(runs.astype("<u4").tobytes()).decode("ascii")
    return {"w": w, "h": h, "rle": payload}


def rle_to_mask(payload: dict) -> np.ndarray:
    """Decode the wire format produced by :func:`mask_to_rle`."""
    w = int(payload["w"])
    h = int(payload["h"])
    raw = base64.b64decode(payload["rle"])
    if len(raw) % 4 != 0:
        raise ValueError("rle payload length is not a multiple of 4")
    runs = np.frombuffer(raw, dtype="<u4").astype(np.int64)
    if runs.sum() != w * h:
        raise ValueError(f"rle runs cover {runs.sum()} pixels, expected {w * h}")
    flat = np.zeros(w * h, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(h, w)


def _fit_mixture(pixels: np.ndarray, seed: int):
    from sklearn.mixture import GaussianMixture

    k = min(GCUT_COMPONENTS, len(pixels))
    if k < 1:
        return None
    gmm = GaussianMixture(
        n_components=k,
        covariance_type="full",
        init_params="kmeans",
        random_state=seed,
        reg_covar=1e-6,
        max_iter=30,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gmm.fit(pixels)
    return gmm


def _subsample(pixels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    if len(pixels) <= GCUT_FIT_SAMPLES:
        return pixels
    idx = rng.choice(len(pixels), size=GCUT_FIT_SAMPLES, replace=False)
    return pixels[idx]


def _neighbor_weights(lab: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """4-neighbor smoothness capacities gamma * exp(-beta * |dc|^2)."""
    dh = np.sum((lab[:, 1:] - lab[:, :-1]) ** 2, axis=-1)
    dv = np.sum((lab[1:, :] - lab[:-1, :]) ** 2, axis=-1)
    total = dh.sum() + dv.sum()
    count = dh.size + dv.size
    mean = total / count if count else 0.0
    beta = 1.0 / mean if mean > 0 else 0.0
    wh = GCUT_GAMMA * np.exp(-beta * dh)
    wv = GCUT_GAMMA * np.exp(-beta * dv)
    return wh, wv


def _min_cut(
    d_fg: np.ndarray, d_bg: np.ndarray, wh: np.ndarray, wv: np.ndarray
) -> np.ndarray:
    """Solve the two-label pixel labeling; True marks foreground.

    Each pixel pays exactly one of its two terminal capacities, so both are
    shifted by their per-pixel minimum, which leaves the argmin cut intact
    and keeps one of them zero.
    """
    h, w = d_fg.shape
    n = h * w
    source = n
    sink = n + 1
    scale = 1024.0
    # maximum_flow downcasts capacities to int32 without checking range
    inf_cap = np.int64(1) << 30

    shift = np.minimum(d_fg, d_bg)
    to_sink = np.rint((d_fg - shift) * scale).astype(np.int64).ravel()
    from_source = np.rint((d_bg - shift) * scale).astype(np.int64).ravel()
    to_sink = np.minimum(to_sink, inf_cap)
    from_source = np.minimum(from_source, inf_cap)

    idx = np.arange(n, dtype=np.int64).reshape(h, w)
    left = idx[:, :-1].ravel()
    right = idx[:, 1:].ravel()
    top = idx[:-1, :].ravel()
    bottom = idx[1:, :].ravel()
    wh_i = np.rint(wh * scale).astype(np.int64).ravel()
    wv_i = np.rint(wv * scale).astype(np.int64).ravel()

    pix = idx.ravel()
    src = np.full(n, source, dtype=np.int64)
    snk = np.full(n, sink, dtype=np.int64)
    rows = np.concatenate([left, right, top, bottom, src, pix, pix, snk])
    cols = np.concatenate([right, left, bottom, top, pix, src, snk, pix])
    zeros = np.zeros(n, dtype=np.int64)
    data = np.concatenate([wh_i, wh_i, wv_i, wv_i, from_source, zeros, to_sink, zeros])

    caps = sparse.csr_matrix(
        (data, (rows, cols)), shape=(n + 2, n + 2), dtype=np.int64
    )
    result = maximum_flow(caps, source, sink)
    residual = caps - result.flow
    residual.data = (residual.data > 0).astype(np.int64)
    residual.eliminate_zeros()
    reached = breadth_first_order(
        residual, i_start=source, directed=True, return_predecessors=False
    )
    fg = np.zeros(n, dtype=bool)
    reached = reached[reached < n]
    fg[reached] = True
    return fg.reshape(h, w)


def _seed_pixels(
    exemplar: Exemplar, h: int, w: int, scale: float
) -> tuple[np.ndarray, np.ndarray]:
    """Hard foreground mask from the exemplar centroid patches."""
    seeds = np.zeros((h, w), dtype=bool)
    centroids = []
    half = GROUP_PATCH // 2
    for stroke in exemplar.strokes:
        c = summarize(stroke).centroid
        cx = min(max(int(c[0] * scale), 0), w - 1)
        cy = min(max(int(c[1] * scale), 0), h - 1)
        centroids.append((cx, cy))
        seeds[
            max(cy - half, 0) : min(cy + half, h - 1) + 1,
            max(cx - half, 0) : min(cx + half, w - 1) + 1,
        ] = True
    return seeds, np.asarray(centroids, dtype=np.int64)


def _flood_fill_fallback(
    lab: np.ndarray, seeds: np.ndarray, centroids: np.ndarray, threshold: float
) -> np.ndarray:
    seed_mean = lab[seeds].mean(axis=0)
    close = np.linalg.norm(lab - seed_mean, axis=-1) <= threshold
    labeled, count = ndimage.label(close, structure=FOUR_CONNECTED)
    if count == 0:
        return seeds.copy()
    keep = set()
    for cx, cy in centroids:
        lbl = labeled[cy, cx]
        if lbl > 0:
            keep.add(lbl)
    if not keep:
        return seeds.copy()
    return np.isin(labeled, sorted(keep))


def color_region(
    img: ReferenceImage,
    exemplar: Exemplar,
    seed: int = 0,
    should_cancel=None,
    color_std_threshold: float = 15.0 / 255.0,
) -> RegionMask:
    """Segment pixels whose color matches the exemplar's surroundings.

    Foreground color model: mixture fit to the pixels under the exemplar
    centroid patches.  Background model: border pixels (2 px frame) plus
    pixels far from the foreground model (beyond three times the mean seed
    distance).  Three rounds of model refit and graph cut; a flood fill from
    the centroids takes over when the cut fails to grow beyond its seeds.
    """
    full_h, full_w = img.height, img.width
    factor = max(1, math.ceil(max(full_h, full_w) / GCUT_MAX_SIDE))
    lab = img.lab[::factor, ::factor] if factor > 1 else img.lab
    h, w = lab.shape[:2]

    rng = np.random.default_rng(seed)
    hard_fg, centroids = _seed_pixels(exemplar, h, w, 1.0 / factor)
    hard_bg = np.zeros((h, w), dtype=bool)
    hard_bg[:2, :] = True
    hard_bg[-2:, :] = True
    hard_bg[:, :2] = True
    hard_bg[:, -2:] = True
    hard_bg &= ~hard_fg

    pixels = lab.reshape(-1, 3)
    fg_pixels = lab[hard_fg]
    fg_model = _fit_mixture(_subsample(fg_pixels, rng), seed)
    if fg_model is None:
        raise RegionEmptyError("exemplar yields no foreground seed pixels")

    # distance of every pixel to the nearest foreground component mean
    means = fg_model.means_
    dist = np.min(
        np.linalg.norm(pixels[:, None, :] - means[None, :, :], axis=-1), axis=1
    ).reshape(h, w)
    mean_seed_dist = float(dist[hard_fg].mean())
    far = dist > max(3.0 * mean_seed_dist, 1e-9)

    bg_init = (hard_bg | far) & ~hard_fg
    if not bg_init.any():
        bg_init = hard_bg
    bg_model = _fit_mixture(_subsample(lab[bg_init], rng), seed + 1)

    wh, wv = _neighbor_weights(lab)
    fg = hard_fg.copy()
    inf = 1e4
    for it in range(GCUT_ITERATIONS):
        if should_cancel is not None and should_cancel():
            raise PipelineCancelled("region inference cancelled")
        if it > 0:
            fg_fit = lab[fg | hard_fg]
            bg_area = ~fg & ~hard_fg
            bg_fit = lab[bg_area | hard_bg] if (bg_area | hard_bg).any() else None
            refit = _fit_mixture(_subsample(fg_fit, rng), seed)
            if refit is not None:
                fg_model = refit
            if bg_fit is not None and len(bg_fit):
                refit = _fit_mixture(_subsample(bg_fit, rng), seed + 1)
                if refit is not None:
                    bg_model = refit
        d_fg = np.clip(-fg_model.score_samples(pixels), 0.0, inf).reshape(h, w)
        if bg_model is not None:
            d_bg = np.clip(-bg_model.score_samples(pixels), 0.0, inf).reshape(h, w)
        else:
            d_bg = np.full((h, w), inf)
        d_fg = np.where(hard_fg, 0.0, d_fg)
        d_bg = np.where(hard_fg, inf, d_bg)
        d_fg = np.where(hard_bg, inf, d_fg)
        d_bg = np.where(hard_bg, 0.0, d_bg)
        fg = _min_cut(d_fg, d_bg, wh, wv)
        fg |= hard_fg
        fg &= ~hard_bg

    grown = int((fg & ~hard_fg).sum())
    if grown < max(1, int(0.01 * h * w)):
        fg = _flood_fill_fallback(lab, hard_fg, centroids, 3.0 * color_std_threshold)

    if factor > 1:
        fg = _upscale_mask(fg, factor, full_h, full_w)
    return RegionMask(mask=fg, provenance="inferred")


def _upscale_mask(mask: np.ndarray, factor: int, h: int, w: int) -> np.ndarray:
    big = np.kron(mask, np.ones((factor, factor), dtype=bool))
    return big[:h, :w]


def semantic_region(img: ReferenceImage, exemplar: Exemplar) -> RegionMask | None:
    """Pixels carrying the label most common under the exemplar centroids.

    None when the reference has no label map.
    """
    if img.labels is None:
        return None
    votes = []
    for stroke in exemplar.strokes:
        votes.append(img.label_at(*summarize(stroke).centroid))
    counts = np.bincount(np.asarray(votes, dtype=np.int64))
    winner = int(np.argmax(counts))
    return RegionMask(mask=img.labels == winner, provenance="inferred")


def infer_region(
    img: ReferenceImage,
    exemplar: Exemplar,
    seed: int = 0,
    should_cancel=None,
) -> RegionMask:
    """Combined target region, reduced to the component nearest the newest stroke.

    Color and semantic masks are intersected when both exist.  Among the
    4-connected components of the result, the one nearest the last exemplar
    stroke's centroid wins (containment counts as distance zero).
    """
    color = color_region(img, exemplar, seed=seed, should_cancel=should_cancel)
    sem = semantic_region(img, exemplar)
    raw = color.mask & sem.mask if sem is not None else color.mask
    if not raw.any():
        raise RegionEmptyError("color and semantic regions do not overlap")

    labeled, count = ndimage.label(raw, structure=FOUR_CONNECTED)
    c = summarize(exemplar.strokes[-1]).centroid
    cx = min(max(int(c[0]), 0), img.width - 1)
    cy = min(max(int(c[1]), 0), img.height - 1)
    if labeled[cy, cx] > 0:
        target = labeled[cy, cx]
    else:
        # nearest mask pixel determines the nearest component
        _, (iy, ix) = ndimage.distance_transform_edt(~raw, return_indices=True)
        target = labeled[iy[cy, cx], ix[cy, cx]]
    return RegionMask(mask=labeled == target, provenance="inferred")


def edit_region(
    region: RegionMask | None,
    op: str,
    polygon: list[tuple[float, float]] | None = None,
    width: float | None = None,
    shape: tuple[int, int] | None = None,
) -> RegionMask:
    """Apply one user edit; the result carries provenance "user_edited".

    "create" replaces the mask with the rasterized polygon, "add" unions it
    in, "subtract" removes it, and "expand" dilates the mask by a disc of
    ``width`` pixels (clipped to the image bounds by construction).
    """
    if shape is None:
        if region is None:
            raise ValueError("edit_region needs a shape when no base region exists")
        shape = region.shape
    h, w = shape
    base = region.mask.copy() if region is not None else np.zeros((h, w), dtype=bool)

    if op in ("create", "add", "subtract"):
        if polygon is None or len(polygon) < 3:
            raise ValueError(f"{op} needs a polygon of at least 3 points")
        patch = _rasterize_polygon([(float(x), float(y)) for x, y in polygon], h, w)
        if op == "create":
            base = patch
        elif op == "add":
            base |= patch
        else:
            base &= ~patch
    elif op == "expand":
        if width is None or width < 0:
            raise ValueError(f"expand needs a non-negative width, got {width}")
        if width > 0 and base.any():
            base = ndimage.distance_transform_edt(~base) <= width
    else:
        raise ValueError(f"unknown region edit op {op!r}")
    return RegionMask(mask=base, provenance="user_edited")


def _rasterize_polygon(polygon: list[tuple[float, float]], h: int, w: int) -> np.ndarray:
    im = Image.new("L", (w, h), 0)
    ImageDraw.Draw(im).polygon(polygon, fill=1)
    return np.asarray(im, dtype=bool)


@njit(cache=True)
def _dijkstra_path(
    cost_enter: np.ndarray, sy: int, sx: int, ty: int, tx: int
) -> np.ndarray:
    """Min-cost 8-connected path; ties broken toward smaller (y, x).

    Returns an (n, 2) array of (y, x) from start to target inclusive.
    """
    h, w = cost_enter.shape
    n = h * w
    dist = np.full(n, np.inf)
    prev = np.full(n, -1, dtype=np.int64)
    done = np.zeros(n, dtype=np.uint8)

    heap_key = np.empty(n * 16, dtype=np.float64)
    heap_idx = np.empty(n * 16, dtype=np.int64)
    size = 0

    def _less(k1, i1, k2, i2):
        return k1 < k2 or (k1 == k2 and i1 < i2)

    start = sy * w + sx
    target = ty * w + tx
    dist[start] = 0.0
    heap_key[0] = 0.0
    heap_idx[0] = start
    size = 1

    while size > 0:
        key = heap_key[0]
        node = heap_idx[0]
        size -= 1
        heap_key[0] = heap_key[size]
        heap_idx[0] = heap_idx[size]
        pos = 0
        while True:
            child = 2 * pos + 1
            if child >= size:
                break
            if child + 1 < size and _less(
                heap_key[child + 1], heap_idx[child + 1], heap_key[child], heap_idx[child]
            ):
                child += 1
            if _less(heap_key[child], heap_idx[child], heap_key[pos], heap_idx[pos]):
                heap_key[pos], heap_key[child] = heap_key[child], heap_key[pos]
                heap_idx[pos], heap_idx[child] = heap_idx[child], heap_idx[pos]
                pos = child
            else:
                break

        if done[node]:
            continue
        done[node] = 1
        if node == target:
            break
        y = node // w
        x = node % w
        for dy in range(-1, 2):
            for dx in range(-1, 2):
                if dy == 0 and dx == 0:
                    continue
                ny = y + dy
                nx = x + dx
                if ny < 0 or ny >= h or nx < 0 or nx >= w:
                    continue
                nb = ny * w + nx
                if done[nb]:
                    continue
                step = 1.4142135623730951 if dy != 0 and dx != 0 else 1.0
                nd = dist[node] + cost_enter[ny, nx] + 0.1 * step
                better = nd < dist[nb] or (nd == dist[nb] and node < prev[nb])
                if better:
                    dist[nb] = nd
                    prev[nb] = node
                    # sift up
                    heap_key[size] = nd
                    heap_idx[size] = nb
                    pos = size
                    size += 1
                    while pos > 0:
                        parent = (pos - 1) // 2
                        if _less(
                            heap_key[pos], heap_idx[pos], heap_key[parent], heap_idx[parent]
                        ):
                            heap_key[pos], heap_key[parent] = (
                                heap_key[parent],
                                heap_key[pos],
                            )
                            heap_idx[pos], heap_idx[parent] = (
                                heap_idx[parent],
                                heap_idx[pos],
                            )
                            pos = parent
                        else:
                            break

    count = 0
    node = target
    while node != -1:
        count += 1
        if node == start:
            break
        node = prev[node]

    out = np.empty((count, 2), dtype=np.int64)
    node = target
    for i in range(count - 1, -1, -1):
        out[i, 0] = node // w
        out[i, 1] = node % w
        node = prev[node]
    return out


def livewire_path(
    img: ReferenceImage, start: tuple[float, float], end: tuple[float, float]
) -> list[tuple[int, int]]:
    """Edge-following pixel path from start to end.

    Entering a pixel costs (1 - gradient) plus a small length term (0.1 per
    unit step), so the path hugs strong edges but cannot wander for free.
    """
    sx, sy = img.clamp_xy(*start)
    ex, ey = img.clamp_xy(*end)
    cost = 1.0 - img.gradient
    path = _dijkstra_path(cost, sy, sx, ey, ex)
    return [(int(x), int(y)) for y, x in path]
