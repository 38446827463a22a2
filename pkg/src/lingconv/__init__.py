"""Batch analytics for GenAI-assisted text detection, embedding similarity
scoring, and event-study estimation with high-dimensional fixed effects."""

__version__ = "0.1.0"
