"""Cancelable vein biometrics via token-bound pseudo-random colorization."""

__version__ = "0.1.0"
