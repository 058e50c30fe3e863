"""Numerical toolkit for polynomial-like restrictions of proper holomorphic maps."""

__version__ = "0.1.0"
