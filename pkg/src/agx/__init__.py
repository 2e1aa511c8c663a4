"""Anytime attack-graph generation with statistical significance and query steering."""

__version__ = "0.1.0"
