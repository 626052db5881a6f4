"""Quantitative Morse theory on the closed unit ball, made executable."""

__version__ = "0.1.0"
