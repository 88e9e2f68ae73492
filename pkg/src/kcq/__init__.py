"""Conditional uncertainty quantification of stochastic structural responses
from noisy measurements, using key-condition quotient estimators."""

__version__ = "0.1.0"
