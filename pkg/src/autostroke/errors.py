"""Exceptions shared across the inference and synthesis pipeline."""

from __future__ import annotations


class PipelineCancelled(Exception):
    """A newer stroke superseded the running pipeline."""


class SuggestionSuppressed(Exception):
    """The pipeline ran but produced nothing to suggest."""


class RegionEmptyError(SuggestionSuppressed):
    """Region inference produced an empty mask."""


class EmptyOutputError(SuggestionSuppressed):
    """The working mask admits no output samples."""


class InvalidExemplarError(ValueError):
    """An exemplar with fewer than two strokes was passed to a fit."""
