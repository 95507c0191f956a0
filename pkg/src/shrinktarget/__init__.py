"""Certified shrinking-target experiments."""

__version__ = "0.1.0"
