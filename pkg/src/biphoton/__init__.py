"""Simulation and analysis of polarization qutrits carried by biphotons."""

__version__ = "0.1.0"
