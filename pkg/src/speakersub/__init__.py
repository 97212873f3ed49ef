"""Speaker-following subtitle placement."""

__version__ = "0.1.0"
