"""Photonic bands, topology and driven dynamics of 2D honeycomb dipolar arrays."""

__version__ = "0.1.0"
