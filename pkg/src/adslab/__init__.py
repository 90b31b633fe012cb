"""Numerical laboratory for dissipative exterior problems of symmetric hyperbolic systems."""

__version__ = "0.1.0"
