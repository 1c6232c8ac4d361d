"""Spatio-temporal analysis of shared e-scooter trips from availability feeds."""

__version__ = "0.1.0"
