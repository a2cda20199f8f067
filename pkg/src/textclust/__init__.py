"""Text clustering benchmark engine."""

__version__ = "0.1.0"
