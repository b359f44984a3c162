"""Reconstruct baseball plays from a single broadcast view."""

__version__ = "0.1.0"
