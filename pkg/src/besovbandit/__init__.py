"""Continuum-armed bandits over Besov balls: wavelet machinery, worst-case
instance families, rate-achieving strategies and an experiment harness."""

__version__ = "0.1.0"
