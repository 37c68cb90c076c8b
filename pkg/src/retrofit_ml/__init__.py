"""Regression toolkit for building energy-savings data."""

__version__ = "0.1.0"
