"""Differential, coverage-guided instruction fuzzing of a buggy MiniRV pipeline."""

__version__ = "0.1.0"
