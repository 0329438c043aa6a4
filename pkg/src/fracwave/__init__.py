"""Spectral simulation of a quadratic wave equation driven by fractional noise."""

__version__ = "0.1.0"
