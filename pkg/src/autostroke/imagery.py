"""Per-pixel fields derived from the reference image.

Everything downstream reads from here: normalized Lab color, lightness,
Sobel gradient strength, the smoothed edge tangent field, and the optional
precomputed label map (class id in the red channel).  A loaded
:class:`ReferenceImage` is immutable and safe to share across threads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from PIL import Image, UnidentifiedImageError
from skimage.color import rgb2lab

logger = logging.getLogger(__name__)

# Patch size used for grouping features and the segmentation seeds, where no
# radius map exists yet to derive one from.
GROUP_PATCH = 5

ETF_ITERATIONS = 3
ETF_RADIUS = 5


class ImageLoadError(Exception):
    """Reference image or label map could not be loaded or does not fit."""


@dataclass
class FlowField:
    """Per-pixel unit tangents, or a flag meaning "use the global frame"."""

    shape: tuple[int, int]
    vectors: np.ndarray | None = None  # (H, W, 2), unit length
    is_default: bool = False

    def tangent_at(self, x: float, y: float) -> tuple[float, float]:
        if self.is_default or self.vectors is None:
            return (1.0, 0.0)
        h, w = self.shape
        iy = min(max(int(y), 0), h - 1)
        ix = min(max(int(x), 0), w - 1)
        tx, ty = self.vectors[iy, ix]
        return (float(tx), float(ty))


@dataclass
class ReferenceImage:
    """A decoded reference image plus all derived per-pixel fields.

    Channels of ``lab`` are normalized to [0, 1] (L/100, (a+128)/255,
    (b+128)/255); ``gradient`` is the Sobel magnitude of the lightness,
    normalized by its maximum.
    """

    width: int
    height: int
    rgb: np.ndarray  # (H, W, 3) uint8
    lab: np.ndarray  # (H, W, 3) float64 in [0, 1]
    lightness: np.ndarray  # (H, W) float64, alias of lab[..., 0]
    gradient: np.ndarray  # (H, W) float64 in [0, 1]
    labels: np.ndarray | None = None  # (H, W) int32 class ids
    _lab_integral: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    _etf: FlowField | None = field(default=None, repr=False)

    def clamp_xy(self, x: float, y: float) -> tuple[int, int]:
        ix = min(max(int(x), 0), self.width - 1)
        iy = min(max(int(y), 0), self.height - 1)
        return ix, iy

    def rgb_at(self, x: float, y: float) -> tuple[int, int, int]:
        ix, iy = self.clamp_xy(x, y)
        r, g, b = self.rgb[iy, ix]
        return int(r), int(g), int(b)

    def label_at(self, x: float, y: float) -> int:
        if self.labels is None:
            raise ValueError("reference image has no label map")
        ix, iy = self.clamp_xy(x, y)
        return int(self.labels[iy, ix])


def _derive_fields(rgb: np.ndarray, labels: np.ndarray | None) -> ReferenceImage:
    h, w = rgb.shape[:2]
    lab_raw = rgb2lab(rgb.astype(np.float64) / 255.0)
    lab = np.empty_like(lab_raw)
    lab[..., 0] = lab_raw[..., 0] / 100.0
    lab[..., 1] = (lab_raw[..., 1] + 128.0) / 255.0
    lab[..., 2] = (lab_raw[..., 2] + 128.0) / 255.0

    lightness = lab[..., 0]
    gx = _sobel(lightness, axis=1)
    gy = _sobel(lightness, axis=0)
    magnitude = np.hypot(gx, gy)
    peak = magnitude.max()
    gradient = magnitude / peak if peak > 0 else magnitude

    integral = np.zeros((h + 1, w + 1, 3), dtype=np.float64)
    np.cumsum(np.cumsum(lab, axis=0), axis=1, out=integral[1:, 1:])

    img = ReferenceImage(
        width=w,
        height=h,
        rgb=rgb,
        lab=lab,
        lightness=lightness,
        gradient=gradient,
        labels=labels,
        _lab_integral=integral,
    )
    img._grad_xy = (gx, gy)  # raw Sobel components, kept for the ETF
    return img


def _sobel(a: np.ndarray, axis: int) -> np.ndarray:
    from scipy import ndimage

    return ndimage.sobel(a, axis=axis, mode="reflect") / 8.0


def load_reference(image_path: str, label_path: str | None = None) -> ReferenceImage:
    """Decode the reference (and optional label map) and derive all fields.

    The label map must match the image dimensions; its red channel carries
    one class id per pixel.  Without a label map the semantic feature is
    simply disabled downstream.
    """
    try:
        with Image.open(image_path) as im:
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError) as exc:
        raise ImageLoadError(f"cannot decode image {image_path!r}: {exc}") from exc

    labels = None
    if label_path is not None:
        try:
            with Image.open(label_path) as im:
                label_rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except (OSError, UnidentifiedImageError) as exc:
            raise ImageLoadError(f"cannot decode label map {label_path!r}: {exc}") from exc
        if label_rgb.shape[:2] != rgb.shape[:2]:
            raise ImageLoadError(
                f"label map dimensions {label_rgb.shape[1::-1]} do not match "
                f"image dimensions {rgb.shape[1::-1]}"
            )
        labels = label_rgb[..., 0].astype(np.int32)

    return _derive_fields(rgb, labels)


def reference_from_array(rgb: np.ndarray, labels: np.ndarray | None = None) -> ReferenceImage:
    """Build a ReferenceImage from an in-memory (H, W, 3) uint8 array."""
    rgb = np.ascontiguousarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ImageLoadError(f"expected (H, W, 3) uint8 array, got {rgb.shape}")
    if labels is not None:
        labels = np.ascontiguousarray(labels, dtype=np.int32)
        if labels.shape != rgb.shape[:2]:
            raise ImageLoadError(
                f"label map shape {labels.shape} does not match image {rgb.shape[:2]}"
            )
    return _derive_fields(rgb, labels)


@njit(cache=True, parallel=True)
def _etf_smooth(tan: np.ndarray, mag: np.ndarray, radius: int) -> np.ndarray:
    h, w = mag.shape
    out = np.zeros_like(tan)
    for y in prange(h):
        for x in range(w):
            tix = tan[y, x, 0]
            tiy = tan[y, x, 1]
            gi = mag[y, x]
            center_zero = tix == 0.0 and tiy == 0.0
            ax = 0.0
            ay = 0.0
            y0 = max(0, y - radius)
            y1 = min(h - 1, y + radius)
            x0 = max(0, x - radius)
            x1 = min(w - 1, x + radius)
            for yy in range(y0, y1 + 1):
                for xx in range(x0, x1 + 1):
                    tjx = tan[yy, xx, 0]
                    tjy = tan[yy, xx, 1]
                    if tjx == 0.0 and tjy == 0.0:
                        continue
                    wm = 0.5 * (1.0 + math.tanh(mag[yy, xx] - gi))
                    if center_zero:
                        wd = 1.0
                        sign = 1.0
                    else:
                        dot = tix * tjx + tiy * tjy
                        wd = abs(dot)
                        sign = 1.0 if dot >= 0.0 else -1.0
                    coeff = wm * wd * sign
                    ax += coeff * tjx
                    ay += coeff * tjy
            norm = math.sqrt(ax * ax + ay * ay)
            if norm > 1e-12:
                out[y, x, 0] = ax / norm
                out[y, x, 1] = ay / norm
    return out


def compute_etf(
    img: ReferenceImage,
    iterations: int = ETF_ITERATIONS,
    radius: int = ETF_RADIUS,
) -> FlowField:
    """Smoothed edge tangent field of the reference image.

    Starts from the gradient rotated 90 degrees and runs ``iterations``
    box-neighborhood passes weighted by relative gradient magnitude and
    direction agreement (with sign flips for opposing tangents).  A constant
    image has no edges to follow and yields the global default frame.
    Results are cached on the image.
    """
    if img._etf is not None and iterations == ETF_ITERATIONS and radius == ETF_RADIUS:
        return img._etf

    h, w = img.height, img.width
    gx, gy = img._grad_xy
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak <= 0:
        result = FlowField(shape=(h, w), is_default=True)
        if iterations == ETF_ITERATIONS and radius == ETF_RADIUS:
            img._etf = result
        return result
    mag = mag / peak

    tan = np.zeros((h, w, 2), dtype=np.float64)
    nonzero = mag > 0
    # gradient rotated 90 degrees: (gx, gy) -> (-gy, gx)
    tan[..., 0] = np.where(nonzero, -gy, 0.0)
    tan[..., 1] = np.where(nonzero, gx, 0.0)
    norms = np.hypot(tan[..., 0], tan[..., 1])
    np.divide(tan[..., 0], norms, out=tan[..., 0], where=norms > 0)
    np.divide(tan[..., 1], norms, out=tan[..., 1], where=norms > 0)

    for _ in range(iterations):
        tan = _etf_smooth(tan, mag, radius)

    # any pixel still without a direction falls back to the default frame
    norms = np.hypot(tan[..., 0], tan[..., 1])
    tan[norms < 0.5, 0] = 1.0
    tan[norms < 0.5, 1] = 0.0

    _orient_coherently(tan)

    result = FlowField(shape=(h, w), vectors=tan)
    if iterations == ETF_ITERATIONS and radius == ETF_RADIUS:
        img._etf = result
    return result


def _orient_coherently(tan: np.ndarray) -> None:
    """Flip tangent signs in place so neighbors agree where possible."""
    h = tan.shape[0]
    row = tan[0]
    dots = np.sum(row[1:] * row[:-1], axis=-1)
    flips = np.where(dots < 0, -1.0, 1.0)
    row[1:] *= np.cumprod(flips)[:, None]
    for y in range(1, h):
        dots = np.sum(tan[y] * tan[y - 1], axis=-1)
        tan[y][dots < 0] *= -1.0


def patch_size_for_radius(r: float) -> int:
    """Odd patch size derived from a stroke's radius, clamped to [5, 21]."""
    p = int(round(r))
    if p % 2 == 0:
        p += 1
    return min(max(p, 5), 21)


def patch_feature(img: ReferenceImage, center: tuple[float, float], patch: int) -> np.ndarray:
    """Mean normalized Lab over an odd ``patch`` x ``patch`` window.

    The window is clipped to the image bounds; centers outside the image are
    clamped to the nearest valid pixel (logged, not fatal).
    """
    if patch < 1 or patch % 2 == 0:
        raise ValueError(f"patch must be odd and >= 1, got {patch}")
    x, y = center
    if not (0 <= x < img.width and 0 <= y < img.height):
        logger.debug("patch center (%s, %s) outside image; clamping", x, y)
    ix, iy = img.clamp_xy(x, y)
    half = patch // 2
    x0 = max(ix - half, 0)
    x1 = min(ix + half, img.width - 1)
    y0 = max(iy - half, 0)
    y1 = min(iy + half, img.height - 1)
    s = img._lab_integral
    total = s[y1 + 1, x1 + 1] - s[y0, x1 + 1] - s[y1 + 1, x0] + s[y0, x0]
    return total / float((x1 - x0 + 1) * (y1 - y0 + 1))


def patch_features(
    img: ReferenceImage, centers: np.ndarray, patches: np.ndarray | int
) -> np.ndarray:
    """Vectorized :func:`patch_feature` for an (N, 2) array of centers."""
    centers = np.asarray(centers, dtype=np.float64)
    n = centers.shape[0]
    if np.isscalar(patches):
        patches = np.full(n, int(patches), dtype=np.int64)
    else:
        patches = np.asarray(patches, dtype=np.int64)
    ix = np.clip(centers[:, 0].astype(np.int64), 0, img.width - 1)
    iy = np.clip(centers[:, 1].astype(np.int64), 0, img.height - 1)
    half = patches // 2
    x0 = np.maximum(ix - half, 0)
    x1 = np.minimum(ix + half, img.width - 1)
    y0 = np.maximum(iy - half, 0)
    y1 = np.minimum(iy + half, img.height - 1)
    s = img._lab_integral
    total = s[y1 + 1, x1 + 1] - s[y0, x1 + 1] - s[y1 + 1, x0] + s[y0, x0]
    area = ((x1 - x0 + 1) * (y1 - y0 + 1)).astype(np.float64)
    return total / area[:, None]


def feature_distance(fa: np.ndarray, fb: np.ndarray) -> float:
    """Squared Euclidean distance between two normalized Lab triples."""
    d = np.asarray(fa, dtype=np.float64) - np.asarray(fb, dtype=np.float64)
    return float(np.dot(d, d))
