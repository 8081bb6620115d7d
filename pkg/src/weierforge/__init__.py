"""Minimal surfaces from Weierstrass data and a finite-stage wedge-escape
construction."""

__version__ = "0.1.0"
