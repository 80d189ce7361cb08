"""Generating series of iterated contour integrals on punctured Riemann
surfaces: transport, tame symbols, reciprocity checks, and modular
L-value identities."""

__version__ = "0.1.0"
