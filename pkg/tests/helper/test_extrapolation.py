"""Test extrapolation helpers."""
import numpy as np
import pytest

from henonlab.helper.extrapolation import (
    ExtrapolationUnstable,
    check_monotone,
    linear_gauge_limit,
    richardson,
)


@pytest.mark.parametrize("exponents", [[1.0], [0.6, 2.0], [0.4, 1.0, 2.5]])
def test_richardson_is_exact_on_its_expansion(exponents):
    """Values that follow the assumed expansion are extrapolated exactly.

    Args:
        exponents (list): The error exponents.
    """
    steps = 0.1 / 2 ** np.arange(len(exponents) + 1)
    values = 3.0 + sum((index + 1) * steps**exponent for index, exponent in enumerate(exponents))

    assert richardson(steps, values, exponents) == pytest.approx(3.0, rel=1e-10)


def test_richardson_sample_count():
    """One more sample than exponents is required."""
    with pytest.raises(ValueError):
        richardson([0.1, 0.05], [1.0, 1.0], [1.0, 2.0])


def test_linear_gauge_limit():
    """The last two samples define the linear extrapolation."""
    gauges = [0.4, 0.2, 0.1]
    values = [5.0, 2.0 + 3 * 0.2, 2.0 + 3 * 0.1]

    assert linear_gauge_limit(gauges, values) == pytest.approx(2.0)

    with pytest.raises(ExtrapolationUnstable):
        linear_gauge_limit([0.1, 0.1], [1.0, 2.0])


def test_check_monotone():
    """Monotone sequences pass, violations beyond the tolerance raise."""
    check_monotone([3.0, 2.0, 1.0])
    check_monotone([1.0, 2.0, 3.0], decreasing=False)
    check_monotone([1.0, 1.0 + 1e-12, 0.5], tolerance=1e-9)

    with pytest.raises(ExtrapolationUnstable):
        check_monotone([3.0, 2.0, 2.5])
