"""Test the backtracking line search on one-dimensional objectives."""
import pytest

from henonlab.helper.errors import ConfigurationError, NumericalFailure
from henonlab.optimization.line_search import BacktrackingLineSearch


def parabola(x: float) -> float:
    """(x - 3)^2, minimal at 3."""
    return (x - 3) ** 2


def translate(point: float, direction: float, step: float) -> float:
    """The flat retraction."""
    return point + step * direction


def test_backtracking():
    """A full step overshoots the minimum; one contraction hits it."""
    search = BacktrackingLineSearch()

    step, point, value = search.search(parabola, translate, 0.0, 6.0, 9.0, -36.0, 1.0)

    assert step == 0.5
    assert point == 3.0
    assert value == 0.0


def test_first_step_is_extrapolated():
    """The second search starts from the step predicted by the previous decrease."""
    search = BacktrackingLineSearch()
    search.search(parabola, translate, 0.0, 6.0, 9.0, -36.0, 1.0)

    # The first trial is 2 * 2 * (4 - 9) / -16 = 1.25, contracted once.
    step, point, _ = search.search(parabola, translate, 1.0, 4.0, 4.0, -16.0, 1.0)

    assert step == pytest.approx(0.625)
    assert point == pytest.approx(3.5)

    search.reset()
    step, _, _ = search.search(parabola, translate, 1.0, 4.0, 4.0, -16.0, 1.0)

    assert step == pytest.approx(0.5)


def test_failing_objective_is_backtracked():
    """Trial points where the objective fails count as infinitely bad."""

    def guarded(x: float) -> float:
        if x > 1:
            raise NumericalFailure("Outside the domain.")

        return (x - 0.5) ** 2

    search = BacktrackingLineSearch()
    step, point, value = search.search(guarded, translate, 0.0, 1.0, 0.25, -1.0, 0.25)

    assert step == pytest.approx(0.5)
    assert point == pytest.approx(0.5)
    assert value == pytest.approx(0.0)


def test_failing_retraction_is_backtracked():
    """Trial steps that cannot be retracted count as infinitely bad."""

    def bounded(point: float, direction: float, step: float) -> float:
        if step > 0.5:
            raise NumericalFailure("Cannot normalize.")

        return point + step * direction

    search = BacktrackingLineSearch()
    step, point, value = search.search(parabola, bounded, 0.0, 6.0, 9.0, -36.0, 1.0)

    assert step == 0.5
    assert point == 3.0
    assert value == 0.0


def test_step_without_decrease_is_rejected():
    """If no trial decreases the objective, the point is kept."""
    search = BacktrackingLineSearch(max_iterations=10)

    step, point, value = search.search(lambda x: x**2, translate, 0.0, 1.0, 0.0, -1.0, 1.0)

    assert step == 0.0
    assert point == 0.0
    assert value == 0.0


def test_ascent_direction():
    """Directions with a nonnegative slope are numerical failures."""
    with pytest.raises(NumericalFailure):
        BacktrackingLineSearch().search(parabola, translate, 0.0, -1.0, 9.0, 6.0, 1.0)


@pytest.mark.parametrize(
    "parameters", [{"contraction_factor": 1.0}, {"sufficient_decrease": 0.0}, {"initial_step": -1.0}]
)
def test_line_search_validation(parameters):
    """Parameters out of range are configuration errors.

    Args:
        parameters (dict): The line search parameters.
    """
    with pytest.raises(ConfigurationError):
        BacktrackingLineSearch(**parameters)
