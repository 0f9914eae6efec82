"""Simulator for multiparty quantum secret sharing with single photons."""

__version__ = "0.1.0"
