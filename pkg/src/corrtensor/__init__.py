"""Tensorizing measures of correlation for finite-alphabet distributions."""

__version__ = "0.1.0"
