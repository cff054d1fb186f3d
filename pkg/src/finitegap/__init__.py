"""Finite-gap theta-functional data for hyperelliptic curves with involution."""

__version__ = "0.1.0"
