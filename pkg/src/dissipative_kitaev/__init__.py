"""Driven-dissipative Kitaev chain: exact operators, Liouvillian spectra and covariance dynamics."""

__version__ = "0.1.0"
