"""Top-level package for cilvr."""

__version__ = "0.3.0"
