"""Toolkit for generating, aggregating and scoring definitions of novel word senses."""

__version__ = "0.1.0"
