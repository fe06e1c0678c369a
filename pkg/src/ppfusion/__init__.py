"""Fused point-pattern abundance modelling.

Simulates ground-truth spatial point patterns from a log-Gaussian Cox
process, degrades them through aerial distance sampling and passive
acoustic monitoring channels, fits single-source and fused Bayesian models
by MCMC, and evaluates recovery of the intensity surface and abundance.
"""

__version__ = "0.1.0"
