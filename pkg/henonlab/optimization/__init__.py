"""Constrained minimization of the weighted Rayleigh quotients."""
