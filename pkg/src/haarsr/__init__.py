"""Multiframe x2 super-resolution by solving for Haar detail subbands."""

__version__ = "0.1.0"
