"""Rasterize or export a document's strokes.

PNG rendering draws each stroke as a round-capped polyline; SVG export emits
one polyline element per stroke.  The provenance mode recolors strokes by
origin (manual black, autocompleted red) for at-a-glance audit images.
"""

from __future__ import annotations

from PIL import Image, ImageDraw

from .model import Document, Stroke, StrokeSource

PROVENANCE_COLORS = {
    StrokeSource.MANUAL: (0, 0, 0),
    StrokeSource.AUTOCOMPLETED: (255, 0, 0),
}
BACKGROUND = (255, 255, 255)


def canvas_size(doc: Document) -> tuple[int, int]:
    """Reference image dimensions, or a bounding box fallback."""
    try:
        with Image.open(doc.image) as im:
            return im.size
    except OSError:
        pass
    max_x, max_y = 64.0, 64.0
    for stroke in doc.all_strokes():
        for p in stroke.points:
            max_x = max(max_x, p.x + stroke.width)
            max_y = max(max_y, p.y + stroke.width)
    return int(max_x + 1), int(max_y + 1)


def _stroke_color(stroke: Stroke, provenance: bool) -> tuple[int, int, int]:
    if provenance:
        return PROVENANCE_COLORS[stroke.source]
    r, g, b, _ = stroke.color
    return (int(r), int(g), int(b))


def _draw_stroke(draw: ImageDraw.ImageDraw, stroke: Stroke, provenance: bool) -> None:
    color = _stroke_color(stroke, provenance)
    pts = stroke.positions()
    w = max(stroke.width, 1.0)
    r = w / 2.0
    if len(pts) > 1:
        draw.line(pts, fill=color, width=max(int(round(w)), 1), joint="curve")
    for x, y in (pts[0], pts[-1]):
        draw.ellipse([x - r, y - r, x + r, y + r], fill=color)


def render_document(
    doc: Document,
    size: tuple[int, int] | None = None,
    provenance: bool = False,
) -> Image.Image:
    """Flat raster of all layers in order, white background."""
    if size is None:
        size = canvas_size(doc)
    im = Image.new("RGB", size, BACKGROUND)
    draw = ImageDraw.Draw(im)
    for layer in doc.layers:
        for stroke in layer.strokes:
            _draw_stroke(draw, stroke, provenance)
    return im


def render_to_png(
    doc: Document,
    path: str,
    size: tuple[int, int] | None = None,
    provenance: bool = False,
) -> None:
    render_document(doc, size=size, provenance=provenance).save(path, format="PNG")


def document_to_svg(
    doc: Document,
    size: tuple[int, int] | None = None,
    provenance: bool = False,
) -> str:
    """SVG with one round-capped polyline per stroke."""
    if size is None:
        size = canvas_size(doc)
    w, h = size
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">'
    ]
    for layer in doc.layers:
        parts.append(f'<g id="layer-{layer.id}">')
        for stroke in layer.strokes:
            r, g, b = _stroke_color(stroke, provenance)
            alpha = 1.0 if provenance else stroke.color[3] / 255.0
            points = " ".join(f"{p.x:g},{p.y:g}" for p in stroke.points)
            parts.append(
                f'<polyline points="{points}" fill="none" '
                f'stroke="rgb({r},{g},{b})" stroke-opacity="{alpha:g}" '
                f'stroke-width="{stroke.width:g}" stroke-linecap="round" '
                f'stroke-linejoin="round"/>'
            )
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts)


def save_render(
    doc: Document,
    path: str,
    size: tuple[int, int] | None = None,
    provenance: bool = False,
) -> None:
    """Write PNG or SVG depending on the file extension."""
    if path.lower().endswith(".svg"):
        with open(path, "w", encoding="utf-8") as f:
            f.write(document_to_svg(doc, size=size, provenance=provenance))
    else:
        render_to_png(doc, path, size=size, provenance=provenance)
