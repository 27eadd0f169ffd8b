"""Symbolic-numeric geometrothermodynamics."""
__version__ = "0.1.0"
