"""Residual kriging of gridded regression predictions."""

__version__ = '0.1.0'
