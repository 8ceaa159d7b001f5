"""Finite-group lattice gauge-Higgs simulation and verification toolkit."""

__version__ = "0.1.0"
