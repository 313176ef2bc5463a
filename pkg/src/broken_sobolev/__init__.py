"""Broken Sobolev spaces on triangulations: DG norms, explicit fields and inequality constants."""

__version__ = "0.1.0"
