"""Richardson-type extrapolation of sequences with known error exponents."""
import logging
from typing import Sequence

import numpy as np

from henonlab.helper.errors import NumericalFailure

# A logger for this module
logger = logging.getLogger(__name__)


class ExtrapolationUnstable(NumericalFailure):
    """Custom exception for sequences that do not behave like their assumed error expansion."""


def richardson(steps: Sequence[float], values: Sequence[float], exponents: Sequence[float]) -> float:
    """Extrapolate values f(h) to h -> 0, assuming f(h) = L + sum_i c_i h^{e_i}.

    One more sample than exponents is required. The expansion is fitted exactly.

    Args:
        steps (Sequence[float]): The positive step sizes h_j.
        values (Sequence[float]): The values f(h_j).
        exponents (Sequence[float]): The positive error exponents e_i.

    Returns:
        float: The extrapolated limit L.
    """
    steps = np.asarray(steps, dtype=float)
    values = np.asarray(values, dtype=float)

    if len(steps) != len(values) or len(steps) != len(exponents) + 1:
        raise ValueError("Richardson extrapolation needs exactly one more sample than error exponents.")

    matrix = np.ones((len(steps), len(steps)))

    for column, exponent in enumerate(exponents, start=1):
        matrix[:, column] = steps**exponent

    return float(np.linalg.solve(matrix, values)[0])


def linear_gauge_limit(gauges: Sequence[float], values: Sequence[float]) -> float:
    """Extrapolate values to a vanishing gauge, assuming f = L + c * gauge for the last two samples.

    Args:
        gauges (Sequence[float]): Positive, decreasing gauge values (e.g. the leading error term).
        values (Sequence[float]): The corresponding values.

    Returns:
        float: The extrapolated limit L.
    """
    g_0, g_1 = float(gauges[-2]), float(gauges[-1])
    f_0, f_1 = float(values[-2]), float(values[-1])

    if g_0 == g_1:
        raise ExtrapolationUnstable("Gauge values must be distinct.")

    return f_1 - (f_0 - f_1) * g_1 / (g_0 - g_1)


def check_monotone(values: Sequence[float], decreasing: bool = True, tolerance: float = 0.0) -> None:
    """Check that a sequence is monotone, up to a relative tolerance.

    Args:
        values (Sequence[float]): The sequence.
        decreasing (bool, optional): Direction of monotonicity. Defaults to True.
        tolerance (float, optional): Admissible relative violation per step. Defaults to 0.

    Raises:
        ExtrapolationUnstable: If the sequence violates monotonicity beyond the tolerance.
    """
    for index, (previous, current) in enumerate(zip(values, values[1:])):
        change = (current - previous) if decreasing else (previous - current)

        if change > tolerance * abs(previous):
            logger.warning("Sequence is not monotone at index %d: %.12g -> %.12g.", index + 1, previous, current)
            raise ExtrapolationUnstable(f"Sequence is not monotone at index {index + 1}.")
