"""Helper functionality, e.g. conversion functions, extrapolation and configuration file loading."""
