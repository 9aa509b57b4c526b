"""Numerical laboratory for m-point correlations of alpha n^theta mod 1."""

__version__ = "0.1.0"
