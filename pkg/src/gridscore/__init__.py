"""Automated scoring of grid-drawing responses with from-scratch neural networks and IRT sample curation."""

__version__ = "0.1.0"
