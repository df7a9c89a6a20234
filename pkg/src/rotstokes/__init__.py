"""Stationary flow past a rotating disk: kernels, potentials, spectral solvers and checks."""

__version__ = "0.1.0"
