"""Concentration diagnostics and exponent sweeps."""
