"""Non-intrusive model order reduction and surrogate-based optimization."""

__version__ = "0.1.0"
