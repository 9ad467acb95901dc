"""Inference of the exemplar: which recent strokes form the repeated element.

Walks the stroke history backward from the newest stroke, admitting each
earlier stroke while the group stays coherent in shape (discrete Frechet
distance between resampled, centroid-aligned polylines) and in at least one
image feature (weighted-Lab color, or label id when a label map exists).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imagery import GROUP_PATCH, ReferenceImage, patch_feature
from .model import Stroke, summarize

FRECHET_SAMPLES = 16


@dataclass(frozen=True)
class GroupingParams:
    """Thresholds controlling exemplar admission.

    ``color_std_threshold`` bounds the per-channel std of weighted Lab
    features, ``segmentation_std_threshold`` bounds the std of label ids,
    ``frechet_rel_threshold`` scales the shape threshold by the longer arc
    length of the two strokes, and ``k_max`` caps the exemplar size.
    """

    color_std_threshold: float = 15.0 / 255.0
    segmentation_std_threshold: float = 1.0
    k_max: int = 50
    lab_weights: tuple[float, float, float] = (0.12, 0.44, 0.44)
    frechet_rel_threshold: float = 0.4

    @classmethod
    def from_params(cls, params: dict) -> "GroupingParams":
        kwargs = {}
        for name in (
            "color_std_threshold",
            "segmentation_std_threshold",
            "k_max",
            "frechet_rel_threshold",
        ):
            if name in params:
                kwargs[name] = params[name]
        if "lab_weights" in params:
            kwargs["lab_weights"] = tuple(params["lab_weights"])
        return cls(**kwargs)


@dataclass
class Exemplar:
    """A contiguous run of recent strokes judged to repeat, oldest first.

    ``shared_features`` names the features ("color", "semantic") whose
    coherence test passes on the final group; it is non-empty by
    construction.
    """

    strokes: list[Stroke]
    shared_features: set[str] = field(default_factory=set)

    @property
    def k(self) -> int:
        return len(self.strokes)


def resample_polyline(points: np.ndarray, n: int = FRECHET_SAMPLES) -> np.ndarray:
    """Resample a polyline to ``n`` points at equal arc-length spacing."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2 or len(points) == 0:
        raise ValueError(f"expected a non-empty (m, 2) polyline, got {points.shape}")
    if len(points) == 1:
        return np.repeat(points, n, axis=0)
    seg = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if total <= 0:
        return np.repeat(points[:1], n, axis=0)
    targets = np.linspace(0.0, total, n)
    idx = np.searchsorted(cum, targets, side="right") - 1
    idx = np.clip(idx, 0, len(seg) - 1)
    local = (targets - cum[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0)
    return points[idx] + local[:, None] * (points[idx + 1] - points[idx])


def frechet_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Discrete Frechet distance between two point sequences.

    Dynamic program over the coupling table: the value at (i, j) is the
    smallest-over-couplings maximum pairwise distance covering prefixes
    a[:i+1] and b[:j+1].
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("frechet_distance requires non-empty sequences")
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    m, n = d.shape
    ca = np.empty((m, n))
    ca[0, 0] = d[0, 0]
    for j in range(1, n):
        ca[0, j] = max(ca[0, j - 1], d[0, j])
    for i in range(1, m):
        ca[i, 0] = max(ca[i - 1, 0], d[i, 0])
        for j in range(1, n):
            ca[i, j] = max(min(ca[i - 1, j], ca[i - 1, j - 1], ca[i, j - 1]), d[i, j])
    return float(ca[m - 1, n - 1])


def _normalized_shape(stroke: Stroke) -> tuple[np.ndarray, float]:
    """Resampled polyline, centroid at the origin, plus its arc length."""
    pts = resample_polyline(stroke.positions())
    return pts - pts.mean(axis=0), stroke.arc_length()


def _stroke_features(
    stroke: Stroke, img: ReferenceImage, weights: np.ndarray
) -> tuple[np.ndarray, int | None]:
    centroid = summarize(stroke).centroid
    feat = patch_feature(img, centroid, GROUP_PATCH) * weights
    label = None
    if img.labels is not None:
        label = img.label_at(*centroid)
    return feat, label


def _coherence(
    feats: list[np.ndarray], labels: list[int | None], params: GroupingParams
) -> set[str]:
    shared: set[str] = set()
    stds = np.std(np.stack(feats), axis=0)
    if np.all(stds <= params.color_std_threshold):
        shared.add("color")
    if all(lbl is not None for lbl in labels):
        if np.std(np.asarray(labels, dtype=np.float64)) < params.segmentation_std_threshold:
            shared.add("semantic")
    return shared


def infer_exemplar(
    history: list[Stroke],
    img: ReferenceImage,
    params: GroupingParams | None = None,
) -> Exemplar | None:
    """Find the repeated element ending at the last stroke of ``history``.

    Returns None when fewer than two strokes cohere; a single stroke never
    constitutes repetition.
    """
    if params is None:
        params = GroupingParams()
    if len(history) < 2:
        return None

    weights = np.asarray(params.lab_weights, dtype=np.float64)
    last = history[-1]
    last_shape, last_len = _normalized_shape(last)
    last_feat, last_label = _stroke_features(last, img, weights)
    feats = [last_feat]
    labels = [last_label]

    group = [last]
    shared = set()
    for candidate in reversed(history[:-1]):
        if len(group) >= params.k_max:
            break
        cand_shape, cand_len = _normalized_shape(candidate)
        threshold = params.frechet_rel_threshold * max(cand_len, last_len)
        if frechet_distance(cand_shape, last_shape) > threshold:
            break
        feat, label = _stroke_features(candidate, img, weights)
        trial_shared = _coherence(feats + [feat], labels + [label], params)
        if not trial_shared:
            break
        group.append(candidate)
        feats.append(feat)
        labels.append(label)
        shared = trial_shared

    if len(group) < 2:
        return None
    group.reverse()
    return Exemplar(strokes=group, shared_features=shared)
