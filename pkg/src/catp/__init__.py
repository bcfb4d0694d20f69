"""Communications-aware trajectory planning: motion, energy, channel and planning models."""

__version__ = "0.1.0"
