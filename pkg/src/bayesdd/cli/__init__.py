"""Command-line front end: ``gen``, ``sweep``, ``evidence``, ``deaton``, ``occam``."""

from .main import main

__all__ = ["main"]
