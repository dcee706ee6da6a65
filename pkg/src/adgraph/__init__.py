"""Deterministic ad-corpus pipeline: dedup, identifier graphs, pseudo-labels."""

__version__ = "0.1.0"
