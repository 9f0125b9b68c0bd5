"""Algebraic modeling, Jacobian compilation, dual simplex kernels and
cutting-plane decomposition."""

__version__ = "0.1.0"
