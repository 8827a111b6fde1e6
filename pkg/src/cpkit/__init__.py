"""cpkit: mine goal + command-workflow knowledge out of design tutorials."""

__version__ = "0.1.0"
