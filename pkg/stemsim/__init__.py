"""Per-instrument music similarity learned from multi-stem audio."""

__version__ = "0.1.0"
