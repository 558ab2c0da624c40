"""Beam alignment for mmWave V2I links using location-binned multipath fingerprints."""

__version__ = "0.1.0"
