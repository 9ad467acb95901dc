"""Orientation and spacing constraints inferred from the exemplar.

Orientation: if the exemplar strokes keep a steady angle to the edge
tangent field, synthesis works in the local flow frame; otherwise in the
global frame.  Spacing: nearest-neighbor distances within the exemplar are
regressed on lightness and gradient strength; a good fit gives a per-pixel
radius map, a poor one a constant map.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidExemplarError
from .grouping import Exemplar
from .imagery import FlowField, ReferenceImage, _etf_smooth
from .model import summarize

R_MIN = 2.0
R_MAX = 64.0
FLOW_ANGLE_STD_DEG = 15.0
MODEL_R2_THRESHOLD = 0.5


class OrientationMode(str, Enum):
    GLOBAL = "global"
    FLOW = "flow"


class RadiusMode(str, Enum):
    CONSTANT = "constant"
    MODEL = "model"


@dataclass
class OrientationMap:
    """Per-position local frame: identity, or rotation onto the flow tangent."""

    mode: OrientationMode
    field: FlowField | None = None

    def frame_at(self, x: float, y: float) -> np.ndarray:
        if self.mode is OrientationMode.GLOBAL or self.field is None:
            return np.eye(2)
        tx, ty = self.field.tangent_at(x, y)
        return np.array([[tx, -ty], [ty, tx]])

    def frames_at(self, positions: np.ndarray) -> np.ndarray:
        """(N, 2, 2) frames for an (N, 2) array of positions."""
        n = len(positions)
        out = np.empty((n, 2, 2))
        if (
            self.mode is OrientationMode.GLOBAL
            or self.field is None
            or self.field.vectors is None
        ):
            out[:] = np.eye(2)  # a default field means tangent (1, 0) everywhere
            return out
        vec = self.field.vectors
        h, w = self.field.shape
        ix = np.clip(positions[:, 0].astype(np.int64), 0, w - 1)
        iy = np.clip(positions[:, 1].astype(np.int64), 0, h - 1)
        t = vec[iy, ix]
        out[:, 0, 0] = t[:, 0]
        out[:, 0, 1] = -t[:, 1]
        out[:, 1, 0] = t[:, 1]
        out[:, 1, 1] = t[:, 0]
        return out


@dataclass
class RadiusMap:
    """Per-pixel stroke spacing, always clamped to [R_MIN, R_MAX]."""

    mode: RadiusMode
    params: tuple[float, float, float]  # (spacing, lightness_coeff, gradient_coeff)
    array: np.ndarray  # (H, W) float64

    def at(self, x: float, y: float) -> float:
        h, w = self.array.shape
        ix = min(max(int(x), 0), w - 1)
        iy = min(max(int(y), 0), h - 1)
        return float(self.array[iy, ix])

    def at_many(self, positions: np.ndarray) -> np.ndarray:
        h, w = self.array.shape
        ix = np.clip(positions[:, 0].astype(np.int64), 0, w - 1)
        iy = np.clip(positions[:, 1].astype(np.int64), 0, h - 1)
        return self.array[iy, ix]

    @property
    def max_radius(self) -> float:
        return float(self.array.max())


@dataclass
class RadiusModelFit:
    """Diagnostics of the spacing regression."""

    beta: np.ndarray  # coefficients for (lightness8, gradient8, 1)
    r_squared: float
    radii: np.ndarray  # exemplar nearest-neighbor distances


def infer_orientation(exemplar: Exemplar, flow: FlowField) -> OrientationMap:
    """Choose flow-guided or global frames from the exemplar's consistency.

    The angle between each stroke direction and the flow tangent under it is
    folded to [0, 90] degrees; a std below 15 degrees means the strokes
    follow the flow.
    """
    if flow.is_default:
        return OrientationMap(mode=OrientationMode.GLOBAL)
    angles = []
    for stroke in exemplar.strokes:
        s = summarize(stroke)
        v = np.asarray(s.direction)
        norm = np.linalg.norm(v)
        if norm < 1e-9:
            continue
        v = v / norm
        t = np.asarray(flow.tangent_at(*s.centroid))
        angles.append(np.degrees(np.arccos(min(abs(float(v @ t)), 1.0))))
    if not angles:
        return OrientationMap(mode=OrientationMode.GLOBAL)
    if float(np.std(angles)) < FLOW_ANGLE_STD_DEG:
        return OrientationMap(mode=OrientationMode.FLOW, field=flow)
    return OrientationMap(mode=OrientationMode.GLOBAL)


def _clamped(values: np.ndarray) -> np.ndarray:
    return np.clip(values, R_MIN, R_MAX)


def fit_radius_model(
    exemplar: Exemplar, img: ReferenceImage
) -> tuple[RadiusMap, RadiusModelFit]:
    """Regress exemplar spacing on local lightness and gradient strength.

    Each stroke's radius is its nearest-neighbor centroid distance.  The
    least-squares fit of r on (lightness*255, gradient*255, 1) is kept when
    it explains at least half the variance; otherwise the map is constant at
    the mean radius.
    """
    if exemplar.k < 2:
        raise InvalidExemplarError(f"radius fit needs k >= 2, got {exemplar.k}")
    centroids = np.array([summarize(s).centroid for s in exemplar.strokes])
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)
    radii = dist.min(axis=1)

    ix = np.clip(centroids[:, 0].astype(np.int64), 0, img.width - 1)
    iy = np.clip(centroids[:, 1].astype(np.int64), 0, img.height - 1)
    l8 = img.lightness[iy, ix] * 255.0
    g8 = img.gradient[iy, ix] * 255.0
    x = np.stack([l8, g8, np.ones_like(l8)], axis=1)
    beta, *_ = np.linalg.lstsq(x, radii, rcond=None)
    pred = x @ beta
    ss_res = float(np.sum((radii - pred) ** 2))
    ss_tot = float(np.sum((radii - radii.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0

    fit = RadiusModelFit(beta=beta, r_squared=r_squared, radii=radii)
    if r_squared >= MODEL_R2_THRESHOLD:
        array = _clamped(
            beta[0] * img.lightness * 255.0 + beta[1] * img.gradient * 255.0 + beta[2]
        )
        params = (float(beta[2]), float(beta[0]), float(beta[1]))
        return RadiusMap(mode=RadiusMode.MODEL, params=params, array=array), fit
    spacing = float(radii.mean())
    array = np.full((img.height, img.width), min(max(spacing, R_MIN), R_MAX))
    return (
        RadiusMap(mode=RadiusMode.CONSTANT, params=(spacing, 0.0, 0.0), array=array),
        fit,
    )


def radius_from_params(
    img: ReferenceImage, params: tuple[float, float, float]
) -> RadiusMap:
    """Radius map from an explicit (spacing, lightness, gradient) triple."""
    spacing, lc, gc = (float(p) for p in params)
    if lc == 0.0 and gc == 0.0:
        array = np.full((img.height, img.width), min(max(spacing, R_MIN), R_MAX))
        return RadiusMap(mode=RadiusMode.CONSTANT, params=(spacing, lc, gc), array=array)
    array = _clamped(spacing + lc * img.lightness * 255.0 + gc * img.gradient * 255.0)
    return RadiusMap(mode=RadiusMode.MODEL, params=(spacing, lc, gc), array=array)


def apply_gesture(
    field: FlowField, gesture: list[tuple[float, float]], brush_radius: float
) -> FlowField:
    """Realign the flow field along a drawn polyline.

    Pixels within ``brush_radius`` of the gesture take the direction of the
    nearest gesture segment; one smoothing pass (uniform magnitude weights)
    blends the seam.  An empty or single-point gesture changes nothing.
    """
    if len(gesture) < 2:
        return field
    if brush_radius <= 0:
        raise ValueError(f"brush radius must be positive, got {brush_radius}")
    h, w = field.shape
    if field.vectors is None:
        vectors = np.zeros((h, w, 2))
        vectors[..., 0] = 1.0
    else:
        vectors = field.vectors.copy()

    best = np.full((h, w), np.inf)
    pts = np.asarray(gesture, dtype=np.float64)
    for a, b in zip(pts[:-1], pts[1:]):
        seg = b - a
        norm = np.linalg.norm(seg)
        if norm < 1e-12:
            continue
        d = seg / norm
        x0 = int(max(min(a[0], b[0]) - brush_radius - 1, 0))
        x1 = int(min(max(a[0], b[0]) + brush_radius + 1, w - 1))
        y0 = int(max(min(a[1], b[1]) - brush_radius - 1, 0))
        y1 = int(min(max(a[1], b[1]) + brush_radius + 1, h - 1))
        if x1 < x0 or y1 < y0:
            continue
        yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
        px = xx + 0.5 - a[0]
        py = yy + 0.5 - a[1]
        t = np.clip((px * seg[0] + py * seg[1]) / (norm * norm), 0.0, 1.0)
        dx = px - t * seg[0]
        dy = py - t * seg[1]
        dd = np.hypot(dx, dy)
        window = best[y0 : y1 + 1, x0 : x1 + 1]
        closer = (dd <= brush_radius) & (dd < window)
        window[closer] = dd[closer]
        sub = vectors[y0 : y1 + 1, x0 : x1 + 1]
        sub[closer] = d

    smoothed = _etf_smooth(vectors, np.ones((h, w)), 5)
    norms = np.hypot(smoothed[..., 0], smoothed[..., 1])
    bad = norms < 0.5
    smoothed[bad, 0] = 1.0
    smoothed[bad, 1] = 0.0
    return FlowField(shape=(h, w), vectors=smoothed)
