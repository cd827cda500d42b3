"""Hybrid rule/LLM fault diagnosis for rotating machinery."""

__version__ = "0.1.0"
