"""Request/response bodies for the REST endpoints.

Documents travel inline in their canonical JSON object form; binary masks
travel as the run-length payload produced by :func:`autostroke.region.mask_to_rle`.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field


class RlePayload(BaseModel):
    """Run-length encoded boolean mask (see the region module for the format)."""

    w: int = Field(ge=1)
    h: int = Field(ge=1)
    rle: str

    def to_dict(self) -> dict:
        return {"w": self.w, "h": self.h, "rle": self.rle}


class SynthRequest(BaseModel):
    """Batch synthesis: run the pipeline once and commit everything."""

    document: dict
    seed: int = 0
    iterations: int | None = Field(default=None, ge=1)
    mu: float | None = Field(default=None, ge=0)
    spacing: float | None = None
    lightness: float | None = None
    gradient: float | None = None
    exemplar_ids: list[int] | None = None
    region: RlePayload | None = None
    orientation_mode: Literal["global", "flow"] | None = None

    def triple(self) -> tuple[float, float, float] | None:
        if self.spacing is None:
            return None
        return (self.spacing, self.lightness or 0.0, self.gradient or 0.0)


class SynthResponse(BaseModel):
    document: dict
    committed_ids: list[int]
    count: int
    suppressed: str | None = None
    region: RlePayload | None = None
    triple: tuple[float, float, float] | None = None
    orientation_mode: str | None = None


class InferRequest(BaseModel):
    document: dict


class ExemplarReport(BaseModel):
    k: int
    stroke_ids: list[int]
    shared_features: list[str]


class RegionReport(BaseModel):
    area: int
    provenance: str


class RadiusReport(BaseModel):
    mode: str
    triple: tuple[float, float, float]
    r_squared: float | None = None


class InferResponse(BaseModel):
    exemplar: ExemplarReport | None
    region: RegionReport | None = None
    orientation_mode: str | None = None
    radius: RadiusReport | None = None


class RenderRequest(BaseModel):
    document: dict
    provenance: bool = False
    format: Literal["png", "svg"] = "png"


class RenderResponse(BaseModel):
    format: str
    data: str  # base64 for png, raw markup for svg
    width: int
    height: int
