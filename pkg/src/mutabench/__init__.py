"""Semantic-preserving mutation and differential evaluation of code benchmarks."""

__version__ = "0.1.0"
