"""Shared builders for synthetic images, strokes, and documents.

Everything here is deterministic: fixtures take explicit seeds and the
stroke factories place points exactly, so tests can assert tight bounds.
"""

from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from autostroke.grouping import Exemplar
from autostroke.imagery import ReferenceImage, reference_from_array
from autostroke.model import Document, Layer, Stroke, StrokePoint


def make_dash(
    sid: int,
    cx: float,
    cy: float,
    t: float,
    length: float = 4.0,
    angle: float = 0.0,
    color: tuple[int, int, int, int] = (0, 0, 0, 255),
    width: float = 2.0,
) -> Stroke:
    """Two-point stroke centered at (cx, cy) along ``angle``."""
    dx = np.cos(angle) * length / 2.0
    dy = np.sin(angle) * length / 2.0
    return Stroke(
        id=sid,
        points=[
            StrokePoint(cx - dx, cy - dy, t),
            StrokePoint(cx + dx, cy + dy, t + 1.0),
        ],
        width=width,
        color=color,
    )


def constant_image(
    h: int = 128,
    w: int = 128,
    color: tuple[int, int, int] = (200, 200, 200),
    labels: np.ndarray | None = None,
) -> ReferenceImage:
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    rgb[:] = color
    return reference_from_array(rgb, labels)


def two_tone_image(
    h: int = 256,
    w: int = 256,
    left: tuple[int, int, int] = (60, 60, 60),
    right: tuple[int, int, int] = (210, 210, 210),
) -> ReferenceImage:
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    rgb[:, : w // 2] = left
    rgb[:, w // 2 :] = right
    return reference_from_array(rgb)


def grid_strokes(
    nx: int,
    ny: int,
    x0: float,
    y0: float,
    spacing: float,
    id_start: int = 0,
    t_start: float = 0.0,
    **dash_kwargs,
) -> list[Stroke]:
    """Row-major grid of dashes; ids and timestamps increase in draw order."""
    strokes = []
    i = 0
    for gy in range(ny):
        for gx in range(nx):
            strokes.append(
                make_dash(
                    id_start + i,
                    x0 + spacing * gx,
                    y0 + spacing * gy,
                    t_start + 2.0 * i,
                    **dash_kwargs,
                )
            )
            i += 1
    return strokes


def grid_exemplar(nx=4, ny=4, x0=100.5, y0=100.5, spacing=8.0, **kw) -> Exemplar:
    return Exemplar(
        strokes=grid_strokes(nx, ny, x0, y0, spacing, **kw),
        shared_features={"color"},
    )


def grid_document(
    image_path: str = "ref.png",
    nx: int = 4,
    ny: int = 4,
    x0: float = 100.5,
    y0: float = 100.5,
    spacing: float = 8.0,
    **kw,
) -> Document:
    layer = Layer(id=0, name="layer 0", strokes=grid_strokes(nx, ny, x0, y0, spacing, **kw))
    return Document(image=image_path, layers=[layer])


def write_png(path, rgb: np.ndarray) -> str:
    Image.fromarray(rgb, mode="RGB").save(str(path))
    return str(path)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    union = (a | b).sum()
    return float((a & b).sum() / union) if union else 1.0


@pytest.fixture
def gray_square_on_white(tmp_path):
    """512x512 white canvas with a 214px mid-gray square; saved to disk.

    The square holds about 500 Poisson samples at spacing 8, which is the
    scale the interactive latency target is specified at.
    """
    rgb = np.full((512, 512, 3), 245, dtype=np.uint8)
    rgb[149:363, 149:363] = 170
    path = write_png(tmp_path / "ref.png", rgb)
    return path, rgb
