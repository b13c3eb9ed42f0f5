"""Bayesian model selection and double-descent laboratory."""

__version__ = "0.1.0"
