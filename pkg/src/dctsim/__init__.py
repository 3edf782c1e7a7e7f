"""Agent-based epidemic simulator with pluggable digital contact tracing."""

__version__ = "0.1.0"
