"""Numerical laboratory for the plasma-vacuum interface problem in a slab."""

__version__ = "0.1.0"
