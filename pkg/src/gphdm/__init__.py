"""Gaussian process hyperbolic dynamical models."""

__version__ = "0.1.0"
