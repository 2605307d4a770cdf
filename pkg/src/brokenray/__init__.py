"""Broken ray transform in the unit disk: simulation and reconstruction."""

__version__ = "0.1.0"
