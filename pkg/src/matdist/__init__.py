"""Material-distribution toolkit for evolving simple bodies."""

__version__ = "0.1.0"
