"""Loss-guided random-walk node embeddings."""

__version__ = "0.1.0"
