"""Spectral discretization of the fractional Henon problem: basis, functionals, extension and bubbles."""
