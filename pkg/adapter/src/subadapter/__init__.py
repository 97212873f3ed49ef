"""Video evidence extraction for speaker-following subtitle placement."""

__version__ = "0.1.0"
