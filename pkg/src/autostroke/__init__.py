"""Autocomplete engine for image-guided repetitive stroking.

Watches a timestamped stroke history drawn over a reference image, detects
repetition, infers the intended exemplar / region / orientation / density,
and synthesizes suggested strokes that a human can accept, partially accept,
reject, or edit live.
"""

__version__ = "0.1.0"

from .constraints import (
    OrientationMap,
    OrientationMode,
    RadiusMap,
    RadiusMode,
    apply_gesture,
    fit_radius_model,
    infer_orientation,
    radius_from_params,
)
from .errors import (
    EmptyOutputError,
    InvalidExemplarError,
    PipelineCancelled,
    RegionEmptyError,
    SuggestionSuppressed,
)
from .grouping import Exemplar, GroupingParams, infer_exemplar
from .imagery import (
    FlowField,
    ImageLoadError,
    ReferenceImage,
    compute_etf,
    load_reference,
    reference_from_array,
)
from .model import (
    Document,
    Layer,
    Stroke,
    StrokePoint,
    StrokeSource,
    StrokeSummary,
    document_from_json,
    document_to_json,
    load_document,
    reconstruct,
    save_document,
    summarize,
)
from .region import (
    RegionMask,
    edit_region,
    infer_region,
    livewire_path,
    mask_to_rle,
    rle_to_mask,
)
from .render import render_document, render_to_png, save_render
from .session import Session, SuggestionSet, inference_report, run_batch
from .synthesis import (
    SynthesisContext,
    SynthesisResult,
    initialize_output,
    synthesize,
)

__all__ = [
    "Document",
    "EmptyOutputError",
    "Exemplar",
    "FlowField",
    "GroupingParams",
    "ImageLoadError",
    "InvalidExemplarError",
    "Layer",
    "OrientationMap",
    "OrientationMode",
    "PipelineCancelled",
    "RadiusMap",
    "RadiusMode",
    "ReferenceImage",
    "RegionEmptyError",
    "RegionMask",
    "Session",
    "Stroke",
    "StrokePoint",
    "StrokeSource",
    "StrokeSummary",
    "SuggestionSet",
    "SuggestionSuppressed",
    "SynthesisContext",
    "SynthesisResult",
    "apply_gesture",
    "compute_etf",
    "document_from_json",
    "document_to_json",
    "edit_region",
    "fit_radius_model",
    "infer_exemplar",
    "infer_orientation",
    "infer_region",
    "inference_report",
    "initialize_output",
    "livewire_path",
    "load_document",
    "load_reference",
    "mask_to_rle",
    "radius_from_params",
    "reconstruct",
    "reference_from_array",
    "render_document",
    "render_to_png",
    "rle_to_mask",
    "run_batch",
    "save_document",
    "save_render",
    "summarize",
    "synthesize",
    "__version__",
]
