"""Cross-view bounding-box trajectory transformation toolkit."""

__version__ = "0.1.0"
