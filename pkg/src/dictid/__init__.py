"""Local identifiability of sparse dictionary learning under l1 cost."""

__version__ = "0.1.0"
