"""Base exceptions, shared by all henonlab modules.

Concrete exceptions are declared in the modules that raise them, and derive from one of these.
"""


class ConfigurationError(Exception):
    """Custom exception for invalid or incomplete run configuration."""


class NumericalFailure(Exception):
    """Custom exception for numerical procedures that fail to deliver a trustworthy result."""
