"""Random 2-dimensional hypertrees: sampling, exact homology, census and density certificates."""

__version__ = "0.1.0"
