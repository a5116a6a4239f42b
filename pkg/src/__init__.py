"""Cost- and size-based best-first search with a benchmark harness."""

__version__ = "1.0.0"
