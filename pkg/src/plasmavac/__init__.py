"""Stability analysis toolkit for a plasma-vacuum interface with a displacement-current vacuum."""

__version__ = "0.1.0"
