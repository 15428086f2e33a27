"""Latent-surface model for aggregated relational data and posterior network statistics."""

__version__ = "0.1.0"
