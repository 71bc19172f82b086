"""Backtracking line search with the Armijo sufficient-decrease condition."""
import logging
import math
from typing import Callable, Optional, Tuple, TypeVar

from henonlab.helper.errors import ConfigurationError, NumericalFailure

# A logger for this module
logger = logging.getLogger(__name__)

Point = TypeVar("Point")
Direction = TypeVar("Direction")


class BacktrackingLineSearch:
    """Back-tracking line search along a retraction.

    The first trial step of every search is extrapolated from the decrease achieved in the previous search, scaled
    by an optimism factor. Steps that increase the objective are rejected.
    """

    def __init__(
        self,
        contraction_factor: float = 0.5,
        optimism: float = 2.0,
        sufficient_decrease: float = 1e-4,
        max_iterations: int = 30,
        initial_step: float = 1.0,
    ):
        """Initialize the line search.

        Args:
            contraction_factor (float, optional): Step reduction per backtracking iteration, in (0, 1).
                Defaults to 0.5.
            optimism (float, optional): Enlargement of the extrapolated first trial step. Defaults to 2.0.
            sufficient_decrease (float, optional): The Armijo constant. Defaults to 1e-4.
            max_iterations (int, optional): Maximum number of backtracking iterations. Defaults to 30.
            initial_step (float, optional): The first trial step length, relative to the direction norm.
                Defaults to 1.0.

        Raises:
            ConfigurationError: If a parameter is out of range.
        """
        if not 0 < contraction_factor < 1:
            raise ConfigurationError(f"The contraction factor {contraction_factor} must lie in (0, 1).")

        if not 0 < sufficient_decrease < 1:
            raise ConfigurationError(f"The sufficient decrease constant {sufficient_decrease} must lie in (0, 1).")

        if initial_step <= 0:
            raise ConfigurationError(f"The initial step {initial_step} must be positive.")

        self.contraction_factor = contraction_factor
        self.optimism = optimism
        self.sufficient_decrease = sufficient_decrease
        self.max_iterations = max_iterations
        self.initial_step = initial_step

        self._previous_value: Optional[float] = None

    def reset(self) -> None:
        """Forget the previous search, so that the next one starts from the initial step."""
        self._previous_value = None

    def _first_step(self, value: float, slope: float, direction_norm: float) -> float:
        """The first trial step of a search.

        Args:
            value (float): The objective at the current point.
            slope (float): The directional derivative, negative.
            direction_norm (float): The norm of the search direction, relative to the point.

        Returns:
            float: The trial step.
        """
        if self._previous_value is not None:
            step = self.optimism * 2 * (value - self._previous_value) / slope

            if math.isfinite(step) and step > 0:
                return step

        return self.initial_step / direction_norm

    def search(
        self,
        objective: Callable[[Point], float],
        retraction: Callable[[Point, Direction, float], Point],
        point: Point,
        direction: Direction,
        value: float,
        slope: float,
        direction_norm: float,
    ) -> Tuple[float, Point, float]:
        """Search a step along a descent direction.

        Args:
            objective (Callable[[Point], float]): The objective function.
            retraction (Callable[[Point, Direction, float], Point]): Maps (point, direction, step) to the next
                point on the constraint manifold.
            point (Point): The current point.
            direction (Direction): The descent direction.
            value (float): The objective at the current point.
            slope (float): The directional derivative along the direction, negative.
            direction_norm (float): The norm of the direction, relative to the point.

        Raises:
            NumericalFailure: If the direction is not a descent direction.

        Returns:
            Tuple[float, Point, float]: The accepted step (zero, if rejected), the new point and its objective value.
        """
        if not slope < 0:
            raise NumericalFailure(f"The search direction is not a descent direction (slope {slope:.3g}).")

        step = self._first_step(value, slope, direction_norm)

        def trial(trial_step: float) -> Tuple[Point, float]:
            try:
                candidate = retraction(point, direction, trial_step)
                return candidate, objective(candidate)

            except NumericalFailure:
                return point, math.inf

        new_point, new_value = trial(step)
        step_count = 1

        # Backtrack while the Armijo criterion is not satisfied
        while new_value > value + self.sufficient_decrease * step * slope and step_count <= self.max_iterations:
            step = self.contraction_factor * step
            new_point, new_value = trial(step)
            step_count = step_count + 1

        # Without any decrease, the step is rejected.
        if new_value > value:
            logger.debug("Line search rejected the step after %d trials.", step_count)
            step = 0.0
            new_point = point
            new_value = value

        self._previous_value = value

        return step, new_point, new_value
