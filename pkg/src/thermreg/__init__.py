"""Closed-loop DVFS temperature regulation with an adjustable-gain integral controller."""

__version__ = "0.1.0"
