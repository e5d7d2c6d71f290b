"""Estimation of functionals under local differential privacy.

Modules
-------
channels      private channels, discrete distributions, distances, audits
representers  bounded representers, kernels and bandwidth selection
estimators    sample-mean and binary-search estimators
moduli        moduli of continuity, lower-bound curve, contraction bound
models        statistical models, worst-case pairs and losses
harness       Monte Carlo risk experiments and rate fitting
"""
__version__ = "0.1.0"
