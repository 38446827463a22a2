"""Batch document-embedding extraction into EMB1 vector stores."""

from .extract import ExtractionConfig, ModelLoadFailure, TokenizationFailure, extract

__all__ = [
    "ExtractionConfig",
    "ModelLoadFailure",
    "TokenizationFailure",
    "extract",
]

__version__ = "0.1.0"
