"""Numerical laboratory for graph-based Lipschitz learning and its continuum limit."""

__version__ = "0.1.0"
