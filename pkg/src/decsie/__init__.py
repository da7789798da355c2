"""Hybrid DEC / surface-integral solver for electromagnetic scattering by inhomogeneous dielectrics."""

__version__ = "0.1.0"
