"""Spectral tools for rescaled graph flows over a curved cylinder axis."""

__version__ = "1.0.0"
