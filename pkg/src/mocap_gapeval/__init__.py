"""Evaluation toolkit for missing-marker reconstruction in optical motion capture."""

__version__ = "0.1.0"
