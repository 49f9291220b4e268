"""Procedural city, population, agenda and crowd simulation toolkit."""

__version__ = "0.1.0"
