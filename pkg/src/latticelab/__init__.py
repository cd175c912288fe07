"""latticelab: exact and numerical tools for mean value formulas on spaces of lattices."""

__version__ = "0.1.0"
