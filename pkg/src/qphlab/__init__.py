"""Numerical laboratory for quantified quantum proof systems."""

__version__ = "0.1.0"
