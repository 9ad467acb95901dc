"""Domain types for strokes, layers, and documents.

Canvas coordinates follow raster conventions: origin at the top-left corner,
x grows right, y grows down.  Every angle in this package is measured with
``atan2`` in that frame, so a mathematically "counter-clockwise" rotation
appears clockwise on screen.  This is stated once here and assumed
everywhere else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

RGBA = tuple[int, int, int, int]

DIRECTION_EPS = 1e-9


class StrokeSource(str, Enum):
    """Whether a stroke was drawn by hand or committed from a suggestion."""

    MANUAL = "manual"
    AUTOCOMPLETED = "autocompleted"


@dataclass
class StrokePoint:
    """A single sample of a stroke: position, timestamp (ms), pen pressure."""

    x: float
    y: float
    t: float
    pressure: float = 1.0


@dataclass
class Stroke:
    """An ordered, timestamped list of sample points with appearance attributes.

    ``source`` is fixed at creation; committed suggestions keep
    ``AUTOCOMPLETED`` forever so provenance can be visualized later.
    """

    id: int
    points: list[StrokePoint]
    width: float = 2.0
    color: RGBA = (0, 0, 0, 255)
    source: StrokeSource = StrokeSource.MANUAL

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("stroke must have at least one point")
        if self.width <= 0:
            raise ValueError("stroke width must be positive")

    @property
    def start_t(self) -> float:
        return self.points[0].t

    @property
    def end_t(self) -> float:
        return self.points[-1].t

    def positions(self) -> list[tuple[float, float]]:
        return [(p.x, p.y) for p in self.points]

    def arc_length(self) -> float:
        total = 0.0
        for a, b in zip(self.points, self.points[1:]):
            total += math.hypot(b.x - a.x, b.y - a.y)
        return total


@dataclass
class StrokeSummary:
    """Centroid and dominant direction; all the synthesizer sees of a stroke.

    ``direction`` is a unit vector, or ``(0, 0)`` for strokes with no usable
    direction (single-point dots, closed loops that cancel out).
    """

    centroid: tuple[float, float]
    direction: tuple[float, float]


def summarize(stroke: Stroke) -> StrokeSummary:
    """Collapse a stroke to its centroid and dominant direction.

    The dominant direction is the normalized average of the vectors from the
    start point to each subsequent point, which keeps the drawing order: a
    left-to-right hatch and a right-to-left hatch summarize differently.
    """
    pts = stroke.points
    n = len(pts)
    cx = sum(p.x for p in pts) / n
    cy = sum(p.y for p in pts) / n
    if n == 1:
        return StrokeSummary((cx, cy), (0.0, 0.0))
    x0, y0 = pts[0].x, pts[0].y
    sx = sum(p.x - x0 for p in pts[1:])
    sy = sum(p.y - y0 for p in pts[1:])
    norm = math.hypot(sx, sy)
    if norm < DIRECTION_EPS:
        return StrokeSummary((cx, cy), (0.0, 0.0))
    return StrokeSummary((cx, cy), (sx / norm, sy / norm))


def reconstruct(stroke: Stroke, new: StrokeSummary) -> Stroke:
    """Rigidly transform a stroke so it summarizes to ``new``.

    Translates the centroid onto ``new.centroid`` and rotates about it by the
    signed angle from the old direction to the new one.  Zero directions (on
    either side) suppress rotation, so dots are never spun.  Width, color,
    timestamps, and pressure are preserved.
    """
    old = summarize(stroke)
    ox, oy = old.direction
    nx, ny = new.direction
    if (ox == 0.0 and oy == 0.0) or (nx == 0.0 and ny == 0.0):
        cos_t, sin_t = 1.0, 0.0
    else:
        # signed angle from old to new: rot(theta) @ old == new
        cos_t = ox * nx + oy * ny
        sin_t = ox * ny - oy * nx
    cx0, cy0 = old.centroid
    cx1, cy1 = new.centroid
    out_points = []
    for p in stroke.points:
        dx, dy = p.x - cx0, p.y - cy0
        rx = cos_t * dx - sin_t * dy
        ry = sin_t * dx + cos_t * dy
        out_points.append(StrokePoint(rx + cx1, ry + cy1, p.t, p.pressure))
    return Stroke(
        id=stroke.id,
        points=out_points,
        width=stroke.width,
        color=stroke.color,
        source=stroke.source,
    )


@dataclass
class Layer:
    """A named, ordered list of strokes."""

    id: int
    name: str
    strokes: list[Stroke] = field(default_factory=list)


def default_params() -> dict:
    """Global tunables stored in the document's "params" block."""
    return {
        "color_std_threshold": 15.0 / 255.0,
        "segmentation_std_threshold": 1.0,
        "k_max": 50,
        "lab_weights": [0.12, 0.44, 0.44],
        "frechet_rel_threshold": 0.4,
        "iterations": 15,
        "mu": 0.1,
        "n_in": 4,
        "n_out": 1,
    }


@dataclass
class Document:
    """A drawing: reference image path, optional label map, ordered layers.

    Round-trips losslessly through :func:`document_to_json` /
    :func:`document_from_json`; serialize -> deserialize -> serialize is
    byte-identical.
    """

    image: str
    labels: str | None = None
    layers: list[Layer] = field(default_factory=list)
    params: dict = field(default_factory=default_params)
    version: int = 1

    def __post_init__(self) -> None:
        if not self.layers:
            self.layers = [Layer(id=0, name="layer 0")]
        layer_ids = [l.id for l in self.layers]
        if len(set(layer_ids)) != len(layer_ids):
            raise ValueError("layer ids must be unique")
        sids = [s.id for l in self.layers for s in l.strokes]
        if len(set(sids)) != len(sids):
            raise ValueError("stroke ids must be unique document-wide")

    def layer_by_id(self, layer_id: int) -> Layer:
        for layer in self.layers:
            if layer.id == layer_id:
                return layer
        raise KeyError(f"no layer with id {layer_id}")

    def all_strokes(self) -> list[Stroke]:
        return [s for layer in self.layers for s in layer.strokes]

    def stroke_by_id(self, stroke_id: int) -> Stroke:
        for s in self.all_strokes():
            if s.id == stroke_id:
                return s
        raise KeyError(f"no stroke with id {stroke_id}")

    def next_stroke_id(self) -> int:
        sids = [s.id for s in self.all_strokes()]
        return max(sids) + 1 if sids else 0

    def next_layer_id(self) -> int:
        return max(l.id for l in self.layers) + 1

    def max_t(self) -> float:
        ts = [p.t for s in self.all_strokes() for p in s.points]
        return max(ts) if ts else 0.0


def _stroke_to_obj(s: Stroke) -> dict:
    return {
        "id": s.id,
        "width": s.width,
        "color": list(s.color),
        "source": s.source.value,
        "points": [[p.x, p.y, p.t, p.pressure] for p in s.points],
    }


def _stroke_from_obj(obj: dict) -> Stroke:
    return Stroke(
        id=obj["id"],
        points=[StrokePoint(*pt) for pt in obj["points"]],
        width=obj["width"],
        color=tuple(obj["color"]),
        source=StrokeSource(obj["source"]),
    )


def document_to_json(doc: Document) -> str:
    """Serialize a document to its canonical JSON form."""
    obj = {
        "version": doc.version,
        "image": doc.image,
    }
    if doc.labels is not None:
        obj["labels"] = doc.labels
    obj["layers"] = [
        {
            "id": layer.id,
            "name": layer.name,
            "strokes": [_stroke_to_obj(s) for s in layer.strokes],
        }
        for layer in doc.layers
    ]
    obj["params"] = doc.params
    return json.dumps(obj, separators=(",", ":"))


def document_from_json(text: str) -> Document:
    obj = json.loads(text)
    if obj.get("version") != 1:
        raise ValueError(f"unsupported document version: {obj.get('version')!r}")
    layers = [
        Layer(
            id=lo["id"],
            name=lo["name"],
            strokes=[_stroke_from_obj(so) for so in lo["strokes"]],
        )
        for lo in obj["layers"]
    ]
    return Document(
        image=obj["image"],
        labels=obj.get("labels"),
        layers=layers,
        params=obj.get("params", default_params()),
        version=obj["version"],
    )


def save_document(doc: Document, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(document_to_json(doc))


def load_document(path: str) -> Document:
    with open(path, "r", encoding="utf-8") as f:
        return document_from_json(f.read())
