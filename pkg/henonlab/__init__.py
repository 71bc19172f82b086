"""The henonlab package."""

# The version string will be replaced by poetry.
__version__ = "0.0.0"
