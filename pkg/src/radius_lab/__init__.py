"""Numerical companion for radius sequences of dominated splittings on the 2-torus."""

__version__ = "0.1.0"
