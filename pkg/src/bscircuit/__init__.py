"""Measurement-only random circuit on a square lattice of Bacon-Shor checks."""

__version__ = "0.1.0"
