"""Adaptive label-efficient prediction, bandits and partial monitoring via optimistic OMD."""

__version__ = "0.1.0"
