"""Nonintersecting Brownian excursions: kernels, determinants, Painleve and Monte Carlo."""

__version__ = "0.1.0"
