"""Robust learning of fixed-structure binary Bayesian networks."""

__version__ = "0.1.0"
