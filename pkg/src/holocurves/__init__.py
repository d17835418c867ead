"""Entire curves avoiding closed sets in C^n: expressions, automorphisms,
approximation, construction pipelines and certificates."""

__version__ = "0.1.0"
