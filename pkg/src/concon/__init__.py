"""Confounded continual-learning benchmarks from logical rule specs."""

__version__ = "0.1.0"
