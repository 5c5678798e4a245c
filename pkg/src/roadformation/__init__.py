"""Distributed receding-horizon formation control for car-like vehicles on roads."""

__version__ = "0.1.0"
