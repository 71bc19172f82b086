"""This module includes small conversion functions that are used throughout the package.

- Clamping of values to an interval
- Relative differences between measured and reference values
- Conversion of numbers to their canonical text form for CSV and JSON output
"""
import math
from typing import Union

import numpy as np


def clamp(value: float, lower: float, upper: float) -> float:
    """Pull a diagnostic back into its admissible interval [lower, upper].

    Concentration diagnostics such as h(eps) are only meaningful inside (0, 1]; values outside come from
    under-resolved peaks. NaN marks a missing diagnostic and is passed through.

    Args:
        value (float): The diagnostic.
        lower (float): The smallest admissible value.
        upper (float): The largest admissible value.

    Raises:
        ValueError: If the interval is empty.

    Returns:
        float: The nearest admissible value, or NaN.
    """
    if upper < lower:
        raise ValueError(f"The interval [{lower}, {upper}] is empty.")

    if math.isnan(value):
        return value

    return min(max(value, lower), upper)


def relative_difference(value: float, reference: float) -> float:
    """Relative distance of a value from a reference.

    Falls back to the absolute difference, if the reference is zero.

    Args:
        value (float): The measured value.
        reference (float): The reference value.

    Returns:
        float: |value - reference| / |reference|.
    """
    difference = abs(value - reference)

    if reference == 0:
        return difference

    return difference / abs(reference)


def float_to_text(value: Union[float, np.floating]) -> str:
    """Convert a float to the shortest decimal text that round-trips exactly.

    Args:
        value (Union[float, np.floating]): The value to convert.

    Returns:
        str: The text form, e.g. '0.1', '1e-05', 'nan', 'inf'.
    """
    value = float(value)

    if math.isnan(value):
        return "nan"

    if math.isinf(value):
        return "inf" if value > 0 else "-inf"

    return repr(value)


def bool_to_text(value: bool) -> str:
    """Convert a flag to lower-case text.

    Args:
        value (bool): The flag.

    Returns:
        str: 'true' or 'false'.
    """
    return "true" if value else "false"


def to_text(value: Union[bool, int, float, str]) -> str:
    """Convert a scalar of any supported type to its canonical text form.

    Args:
        value (Union[bool, int, float, str]): The scalar.

    Returns:
        str: The canonical text.
    """
    if isinstance(value, (bool, np.bool_)):
        return bool_to_text(bool(value))

    if isinstance(value, (int, np.integer)):
        return str(int(value))

    if isinstance(value, (float, np.floating)):
        return float_to_text(value)

    return str(value)


def to_builtin(value):
    """Recursively convert numpy scalars and arrays to built-in Python types, for JSON output.

    Non-finite floats are converted to their text form, since JSON has no representation for them.

    Args:
        value (Any): A scalar, array, list, tuple or dict.

    Returns:
        Any: The same structure, built from built-in types.
    """
    if isinstance(value, dict):
        return {str(key): to_builtin(item) for key, item in value.items()}

    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]

    if isinstance(value, np.ndarray):
        return [to_builtin(item) for item in value.tolist()]

    if isinstance(value, (bool, np.bool_)):
        return bool(value)

    if isinstance(value, (int, np.integer)):
        return int(value)

    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else float_to_text(value)

    return value
