"""Numerical laboratory for quasi-periodic analytic Jacobi cocycles."""

__version__ = "0.1.0"
