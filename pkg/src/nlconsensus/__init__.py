"""Nonlinear consensus dynamics on graphs: spectra, equilibria and cluster robustness."""

__version__ = "0.1.0"
