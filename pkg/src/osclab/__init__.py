"""Finite-element laboratory for elliptic problems on domains with rapidly
oscillating boundaries and reaction terms concentrated in thin layers."""

__version__ = "0.1.0"
