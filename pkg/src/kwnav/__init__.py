"""Navigation geometry and Monte Carlo accuracy simulation for tracked K-wire insertion."""

__version__ = "0.1.0"
