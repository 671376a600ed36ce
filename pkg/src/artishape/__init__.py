"""Articulated shape dissimilarity from RPCA distinctness of screened-Poisson pixel features."""

__version__ = "0.1.0"
