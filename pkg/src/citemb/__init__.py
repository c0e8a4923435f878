"""Graph and external embeddings of citation networks, evaluated against hierarchical codes."""

__version__ = "0.1.0"
