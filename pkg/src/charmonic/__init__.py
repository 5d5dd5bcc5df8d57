"""Numerical workbench for conformal-harmonic maps."""

__version__ = "0.1.0"
