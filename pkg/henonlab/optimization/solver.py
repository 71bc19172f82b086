"""Ground states of the scalar and the coupled Henon problem, by constrained minimization of Rayleigh quotients.

The quotient is minimized on the constraint manifold {constraint integral = 1} by a projected gradient flow. The
gradient is preconditioned with the inverse fractional Laplacian (a Sobolev gradient), steps are chosen by a
backtracking Armijo line search, and every trial point is scaled back onto the constraint manifold. Close to a
minimizer the quotient is flat to rounding precision, and steps are accepted when they lower the stationarity
residual instead. In the default positivity mode the converged traces are oriented and, where they ring negative,
replaced by the projection of their absolute values.

Constrained minimizers solve the Euler-Lagrange equations with a multiplier; scaling by beta turns them into weak
solutions of the Henon system (see `lagrange_rescale`).
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from retry.api import retry_call

from henonlab.helper.errors import ConfigurationError, NumericalFailure
from henonlab.optimization.line_search import BacktrackingLineSearch
from henonlab.spectral.core import (
    BasisSpec,
    ProblemConfig,
    SpectralField,
    frac_laplacian,
    hs_norm,
    make_basis,
    to_coefficients,
)
from henonlab.spectral.energy import (
    DENOMINATOR_TOLERANCE,
    ExponentConfig,
    ZeroDenominator,
    gradient_pair,
    mixed_gradient,
    mixed_term,
    power_gradient,
    power_term,
    quotient_scalar,
    quotient_system,
    scalar_gradient,
)

# A logger for this module
logger = logging.getLogger(__name__)

# Relative tolerance for classifying an exponent as critical.
CRITICAL_TOLERANCE = 1e-12

# Admissible negative overshoot of converged traces, relative to their maximum.
TRACE_TOLERANCE = 1e-8

# Number of halvings of the polishing step.
POLISH_TRIALS = 12

Fields = Tuple[SpectralField, ...]


class NotConverged(NumericalFailure):
    """Custom exception for solves that exhaust their iteration budget. Carries the last iterate."""

    def __init__(self, message: str, state: "GroundState"):
        """Initialize the exception.

        Args:
            message (str): The message.
            state (GroundState): The last iterate, flagged as not converged.
        """
        super().__init__(message)
        self.state = state


class CriticalExponent(ConfigurationError):
    """Custom exception for exponents at or beyond the critical exponent, without the degeneration flag."""


@dataclass(frozen=True)
class SolverOptions:
    """Options of the projected gradient solver."""

    # The iteration budget of the first attempt.
    max_iters: int = 4000

    # Threshold for the relative stationarity residual.
    tol_grad: float = 1e-7

    # Threshold for the relative quotient decrease of the last step.
    tol_quotient: float = 1e-10

    # The first trial step, relative to the size of the iterate.
    initial_step: float = 0.5

    # The step contraction factor of the line search.
    backtracking: float = 0.5

    # The Armijo constant.
    sufficient_decrease: float = 1e-4

    # Center and width of the initial bump exp(-(x - c)^2 / (2 w^2)) (1 - x^2).
    init_center: float = 0.5
    init_width: float = 0.35

    # 'abs' orients converged traces and removes their negative ringing, 'none' keeps signs.
    positivity: str = "abs"

    # Admit exponents at or beyond the critical exponent (degeneration runs).
    allow_critical: bool = False

    # Number of restarts from the last iterate, each with a doubled budget.
    restarts: int = 2

    # Exponents within this relative distance below the critical exponent get an enlarged budget.
    near_critical_margin: float = 0.1
    near_critical_factor: int = 4

    # Below this stationarity residual, steps that lower the residual are accepted without an Armijo decrease.
    polish_threshold: float = 1e-5

    def __post_init__(self):
        """Validate the options."""
        if self.max_iters < 1:
            raise ConfigurationError(f"max_iters={self.max_iters} must be at least 1.")

        if self.tol_grad <= 0 or self.tol_quotient <= 0:
            raise ConfigurationError("Solver tolerances must be positive.")

        if not 0 < self.backtracking < 1:
            raise ConfigurationError(f"The backtracking factor {self.backtracking} must lie in (0, 1).")

        if not -1 < self.init_center < 1 or self.init_width <= 0:
            raise ConfigurationError("The initial bump must be centered inside the ball, with positive width.")

        if self.positivity not in ("abs", "none"):
            raise ConfigurationError(f"Unknown positivity mode '{self.positivity}'.")

        if self.restarts < 0 or self.near_critical_factor < 1:
            raise ConfigurationError("Restarts must be nonnegative, and the near-critical factor at least 1.")

        if self.polish_threshold < 0:
            raise ConfigurationError(f"The polish threshold {self.polish_threshold} must be nonnegative.")

    def budget(self, exponent: float, crit_exp: float) -> int:
        """The iteration budget of the first attempt, enlarged for near-critical exponents.

        Args:
            exponent (float): The total exponent p + q.
            crit_exp (float): The critical exponent.

        Returns:
            int: The number of iterations.
        """
        if (crit_exp - exponent) / crit_exp < self.near_critical_margin:
            return self.max_iters * self.near_critical_factor

        return self.max_iters


@dataclass(frozen=True)
class GroundState:
    """A solved minimizer of the scalar (v is None) or the system quotient."""

    u: SpectralField
    v: Optional[SpectralField]

    # The quotient value, an estimate of the minimum.
    quotient: float

    # The Lagrange multiplier, quotient / (p + q) on the constraint manifold.
    multiplier: float

    # The rescaling factor that turns the minimizer into a weak solution.
    beta: float

    converged: bool
    iterations: int

    # Relative stationarity residual of the minimizer; after rescaling, the residual of the Henon system.
    residual_norm: float

    config: ProblemConfig
    alpha: float

    # The total exponent r = p + q.
    exponent: float

    exponents: Optional[ExponentConfig] = None
    rescaled: bool = False
    quotient_history: Tuple[float, ...] = ()

    # The smallest trace sample, relative to the largest.
    trace_minimum: float = 0.0

    @property
    def is_system(self) -> bool:
        """Whether this is a solution of the coupled problem."""
        return self.v is not None

    @property
    def fields(self) -> Fields:
        """The solution fields, (u,) or (u, v)."""
        return (self.u,) if self.v is None else (self.u, self.v)


@dataclass(frozen=True)
class MultiplierEstimates:
    """Two estimates of the Lagrange multiplier, which agree at constrained critical points."""

    # From the energy identity: energy / ((p + q) * constraint).
    energy: float

    # Least-squares fit of (-Delta)^s f = multiplier * constraint gradient, in the H^{-s} inner product.
    least_squares: float

    @property
    def relative_gap(self) -> float:
        """The relative difference of the two estimates."""
        return abs(self.energy - self.least_squares) / abs(self.energy)


class VariationalProblem(ABC):
    """A Rayleigh quotient energy / constraint^(2/r) on fields in a common basis."""

    def __init__(self, basis: BasisSpec, alpha: float, s: float, exponent: float):
        """Initialize the problem.

        Args:
            basis (BasisSpec): The basis.
            alpha (float): The weight exponent.
            s (float): The fractional order.
            exponent (float): The homogeneity r of the constraint integral.
        """
        self.basis = basis
        self.alpha = alpha
        self.s = s
        self.exponent = exponent

    @abstractmethod
    def constraint(self, fields: Fields) -> float:
        """The constraint integral."""

    @abstractmethod
    def constraint_gradient(self, fields: Fields) -> Fields:
        """The projected derivatives of the constraint integral."""

    @abstractmethod
    def quotient(self, fields: Fields) -> float:
        """The Rayleigh quotient."""

    def energy(self, fields: Fields) -> float:
        """The sum of the squared H^s norms.

        Args:
            fields (Fields): The fields.

        Returns:
            float: The energy.
        """
        return sum(hs_norm(field, self.s) ** 2 for field in fields)

    def normalize(self, fields: Fields) -> Fields:
        """Scale fields onto the constraint manifold.

        Args:
            fields (Fields): The fields.

        Raises:
            ZeroDenominator: If the constraint integral vanishes.

        Returns:
            Fields: The scaled fields, with a unit constraint integral.
        """
        constraint = self.constraint(fields)

        if not constraint > DENOMINATOR_TOLERANCE:
            raise ZeroDenominator(f"The constraint integral {constraint:.3g} vanishes; cannot normalize.")

        factor = constraint ** (-1 / self.exponent)
        return tuple(factor * field for field in fields)

    def multiplier(self, fields: Fields) -> float:
        """The multiplier energy / (r * constraint) of the Euler-Lagrange equations.

        Args:
            fields (Fields): The fields.

        Returns:
            float: The multiplier.
        """
        return self.energy(fields) / (self.exponent * self.constraint(fields))

    def gradient(self, fields: Fields) -> Fields:
        """The gradient of the quotient with respect to the coefficients.

        Args:
            fields (Fields): The fields.

        Returns:
            Fields: One gradient component per field.
        """
        constraint = self.constraint(fields)
        scale = constraint ** (-2 / self.exponent)
        multiplier = self.multiplier(fields)

        return tuple(
            2 * scale * (frac_laplacian(field, self.s) - multiplier * derivative)
            for field, derivative in zip(fields, self.constraint_gradient(fields))
        )

    def stationarity(self, fields: Fields) -> float:
        """Relative coefficient-space residual of (-Delta)^s f = multiplier * constraint gradient.

        It is invariant under scaling, and equals the Henon system residual of the Lagrange-rescaled fields.

        Args:
            fields (Fields): The fields.

        Returns:
            float: The residual.
        """
        multiplier = self.multiplier(fields)
        residual = 0.0
        reference = 0.0

        for field, derivative in zip(fields, self.constraint_gradient(fields)):
            operator = frac_laplacian(field, self.s).coeffs
            residual += float(np.sum((operator - multiplier * derivative.coeffs) ** 2))
            reference += float(np.sum(operator**2))

        return float(np.sqrt(residual / reference))


class ScalarProblem(VariationalProblem):
    """The scalar quotient ||w||^2 / (int |x|^alpha |w|^r)^(2/r)."""

    def constraint(self, fields: Fields) -> float:
        """The integral int |x|^alpha |w|^r."""
        return power_term(fields[0], self.exponent, self.alpha)

    def constraint_gradient(self, fields: Fields) -> Fields:
        """The projected derivative r |x|^alpha |w|^{r-2} w."""
        return (power_gradient(fields[0], self.exponent, self.alpha),)

    def quotient(self, fields: Fields) -> float:
        """The scalar Rayleigh quotient."""
        return quotient_scalar(fields[0], self.exponent, self.alpha, self.s)


class SystemProblem(VariationalProblem):
    """The system quotient (||u||^2 + ||v||^2) / (int |x|^alpha |u|^p |v|^q)^(2/(p+q))."""

    def __init__(self, basis: BasisSpec, alpha: float, s: float, exponents: ExponentConfig):
        """Initialize the problem.

        Args:
            basis (BasisSpec): The basis.
            alpha (float): The weight exponent.
            s (float): The fractional order.
            exponents (ExponentConfig): The exponents p and q.
        """
        super().__init__(basis, alpha, s, exponents.total)
        self.exponents = exponents

    def constraint(self, fields: Fields) -> float:
        """The mixed integral int |x|^alpha |u|^p |v|^q."""
        return mixed_term(fields[0], fields[1], self.exponents, self.alpha)

    def constraint_gradient(self, fields: Fields) -> Fields:
        """The projected partial derivatives of the mixed integral."""
        return mixed_gradient(fields[0], fields[1], self.exponents, self.alpha)

    def quotient(self, fields: Fields) -> float:
        """The system Rayleigh quotient."""
        return quotient_system(fields[0], fields[1], self.exponents, self.alpha, self.s)


def initial_bump(basis: BasisSpec, options: SolverOptions) -> SpectralField:
    """The deterministic initial guess exp(-(x - c)^2 / (2 w^2)) (1 - x^2).

    Args:
        basis (BasisSpec): The basis.
        options (SolverOptions): Provides center c and width w.

    Returns:
        SpectralField: The projected bump.
    """
    x = basis.nodes
    samples = np.exp(-((x - options.init_center) ** 2) / (2 * options.init_width**2)) * (1 - x**2)
    return to_coefficients(samples, basis)


def _trace_minimum(fields: Fields) -> float:
    """The smallest trace sample of the fields, relative to the largest in magnitude."""
    return min(float(field.samples.min() / np.max(np.abs(field.samples))) for field in fields)


class ProjectedGradientSolver:
    """Sobolev-preconditioned projected gradient descent on the constraint manifold of a variational problem."""

    def __init__(self, problem: VariationalProblem, options: SolverOptions, initial: Fields, budget: int):
        """Initialize the solver at a starting point.

        Args:
            problem (VariationalProblem): The problem.
            options (SolverOptions): The solver options.
            initial (Fields): The starting fields; they are retracted onto the manifold.
            budget (int): The iteration budget of the first attempt.
        """
        self.problem = problem
        self.options = options
        self.budget = budget

        self.line_search = BacktrackingLineSearch(
            contraction_factor=options.backtracking,
            sufficient_decrease=options.sufficient_decrease,
            initial_step=options.initial_step,
        )

        self.point = self.problem.normalize(self._positive(initial))
        self.value = self.problem.quotient(self.point)
        self.history: List[float] = [self.value]
        self.iterations = 0
        self.attempt = 0
        self._stalled = False

    def _positive(self, fields: Fields) -> Fields:
        """Replace traces with negative samples by the projection of their absolute values.

        Args:
            fields (Fields): The fields.

        Returns:
            Fields: The fields with nonnegative traces, up to projection ringing.
        """
        if self.options.positivity == "none":
            return tuple(fields)

        return tuple(
            to_coefficients(np.abs(field.samples), field.basis) if field.samples.min() < 0 else field
            for field in fields
        )

    def retraction(self, point: Fields, direction: Fields, step: float) -> Fields:
        """Move along a direction and return to the constraint manifold.

        Trial points keep their signs; signs are settled once the iteration has converged.

        Args:
            point (Fields): The current fields.
            direction (Fields): The search direction.
            step (float): The step length.

        Returns:
            Fields: The retracted fields.
        """
        moved = tuple(field + step * delta for field, delta in zip(point, direction))
        return self.problem.normalize(moved)

    def _polish(self, direction: Fields) -> float:
        """Step along the preconditioned gradient, if that lowers the residual and does not raise the quotient.

        On the constraint manifold the step 1/2 is one inverse iteration f -> multiplier (-Delta)^{-s} g; shorter
        steps are tried by halving.

        Args:
            direction (Fields): The preconditioned descent direction.

        Returns:
            float: The accepted step, zero if no trial lowered the residual.
        """
        stationarity = self.problem.stationarity(self.point)

        if not stationarity < self.options.polish_threshold:
            return 0.0

        step = 0.5

        for _ in range(POLISH_TRIALS):
            try:
                candidate = self.retraction(self.point, direction, step)
                value = self.problem.quotient(candidate)

            except NumericalFailure:
                step = step / 2
                continue

            if value <= self.value and self.problem.stationarity(candidate) < stationarity:
                self._stalled = True
                self.point, self.value = candidate, value
                self.history.append(value)
                return step

            step = step / 2

        return 0.0

    def _settle_signs(self) -> None:
        """Orient converged traces by their largest sample, and remove negative ringing in 'abs' mode.

        The projection of the absolute values replaces the iterate only if it stays stationary and does not raise the
        quotient.
        """
        if self.options.positivity == "none":
            return

        self.point = tuple(
            -1 * field if field.samples[np.argmax(np.abs(field.samples))] < 0 else field for field in self.point
        )

        if _trace_minimum(self.point) >= -TRACE_TOLERANCE:
            return

        candidate = self.problem.normalize(self._positive(self.point))
        value = self.problem.quotient(candidate)

        if value <= self.value and self.problem.stationarity(candidate) < self.options.tol_grad:
            self.point, self.value = candidate, value
            self.history.append(value)

        else:
            logger.debug("Kept the signed iterate; its absolute value is not stationary.")

    def _precondition(self, gradient: Fields) -> Fields:
        """The descent direction -(-Delta)^{-s} gradient."""
        return tuple(-1 * frac_laplacian(component, -self.problem.s) for component in gradient)

    def step(self) -> float:
        """Perform one line search along the preconditioned gradient.

        Returns:
            float: The accepted step, zero if the line search made no progress.
        """
        gradient = self.problem.gradient(self.point)
        direction = self._precondition(gradient)
        slope = sum(float(np.dot(g.coeffs, d.coeffs)) for g, d in zip(gradient, direction))

        if not slope < 0:
            return 0.0

        direction_norm = np.sqrt(self.problem.energy(direction) / self.problem.energy(self.point))

        step, new_point, new_value = self.line_search.search(
            self.problem.quotient, self.retraction, self.point, direction, self.value, slope, direction_norm
        )
        self.iterations += 1

        if step > 0:
            self._stalled = (self.value - new_value) <= self.options.tol_quotient * self.value
            self.point, self.value = new_point, new_value
            self.history.append(new_value)
            return step

        return self._polish(direction)

    def state(self, converged: bool) -> GroundState:
        """The current iterate as a ground state.

        Args:
            converged (bool): The convergence flag.

        Returns:
            GroundState: The state.
        """
        problem = self.problem
        multiplier = problem.multiplier(self.point)
        exponent = problem.exponent
        beta = lagrange_factor(exponent, multiplier)

        trace_minimum = _trace_minimum(self.point)

        u = self.point[0]
        v = self.point[1] if len(self.point) > 1 else None

        return GroundState(
            u=u,
            v=v,
            quotient=self.value,
            multiplier=multiplier,
            beta=beta,
            converged=converged,
            iterations=self.iterations,
            residual_norm=problem.stationarity(self.point),
            config=problem.basis.config,
            alpha=problem.alpha,
            exponent=exponent,
            exponents=getattr(problem, "exponents", None),
            quotient_history=tuple(self.history),
            trace_minimum=trace_minimum,
        )

    def run(self) -> GroundState:
        """One attempt: iterate until convergence or until the budget of this attempt is exhausted.

        Raises:
            NotConverged: If the budget is exhausted, or the line search stalls away from a stationary point.

        Returns:
            GroundState: The converged state.
        """
        budget = self.budget * 2**self.attempt
        self.attempt += 1
        self.line_search.reset()

        for _ in range(budget):
            stationarity = self.problem.stationarity(self.point)

            if stationarity < self.options.tol_grad and self._stalled:
                break

            if self.step() == 0:
                if self.problem.stationarity(self.point) < self.options.tol_grad:
                    break

                raise NotConverged(
                    f"Line search stalled at stationarity residual {stationarity:.3g}.", self.state(False)
                )

        else:
            if not self.problem.stationarity(self.point) < self.options.tol_grad:
                raise NotConverged(f"Iteration budget of {budget} exhausted.", self.state(False))

        self._settle_signs()
        state = self.state(True)

        if state.trace_minimum < -TRACE_TOLERANCE:
            logger.warning("Converged trace has negative samples (relative minimum %.3g).", state.trace_minimum)

        logger.info(
            "Converged after %d iterations: quotient %.12g, residual %.3g.",
            state.iterations,
            state.quotient,
            state.residual_norm,
        )
        return state

    def solve(self) -> GroundState:
        """Run attempts, restarting from the last iterate with doubled budgets.

        Raises:
            NotConverged: If all attempts fail; carries the last iterate.

        Returns:
            GroundState: The converged state.
        """
        return retry_call(self.run, exceptions=NotConverged, tries=self.options.restarts + 1, logger=logger)


def _check_exponent(exponent: float, config: ProblemConfig, options: SolverOptions) -> None:
    """Reject exponents outside the range, in which minimizers exist.

    Args:
        exponent (float): The total exponent.
        config (ProblemConfig): The problem configuration.
        options (SolverOptions): Provides the degeneration flag.

    Raises:
        ConfigurationError: If the exponent does not exceed 2.
        CriticalExponent: If the exponent reaches the critical exponent without the degeneration flag.
    """
    if exponent <= 2:
        raise ConfigurationError(f"The total exponent {exponent} must exceed 2.")

    if exponent >= config.crit_exp * (1 - CRITICAL_TOLERANCE) and not options.allow_critical:
        raise CriticalExponent(
            f"The total exponent {exponent} reaches the critical exponent {config.crit_exp}; "
            "set allow_critical for degeneration runs."
        )


def _initial_fields(basis: BasisSpec, options: SolverOptions, count: int, initial: Optional[Sequence]) -> Fields:
    """Starting fields: a warm start, or copies of the initial bump.

    Args:
        basis (BasisSpec): The basis.
        options (SolverOptions): The solver options.
        count (int): The number of fields.
        initial (Optional[Sequence]): Warm-start fields, if any.

    Returns:
        Fields: The starting fields, in the basis.
    """
    if initial is None:
        bump = initial_bump(basis, options)
        return (bump,) * count

    if len(initial) != count:
        raise ConfigurationError(f"Expected {count} warm-start fields, got {len(initial)}.")

    return tuple(SpectralField(basis, field.coeffs) for field in initial)


def _solve(problem: VariationalProblem, config: ProblemConfig, options: SolverOptions, initial: Fields) -> GroundState:
    """Run the projected gradient solver on a problem.

    Args:
        problem (VariationalProblem): The problem.
        config (ProblemConfig): The problem configuration.
        options (SolverOptions): The solver options.
        initial (Fields): The starting fields.

    Raises:
        NotConverged: If the solver does not converge within its restarts.

    Returns:
        GroundState: The converged state.
    """
    budget = options.budget(problem.exponent, config.crit_exp)
    solver = ProjectedGradientSolver(problem, options, initial, budget)

    try:
        return solver.solve()

    except NotConverged as error:
        logger.warning("Solve did not converge (exponent %.6g, alpha %.4g): %s", problem.exponent, problem.alpha, error)
        raise


def minimize_scalar(
    config: ProblemConfig,
    r: float,
    alpha: Optional[float] = None,
    opts: Optional[SolverOptions] = None,
    initial: Optional[Sequence[SpectralField]] = None,
) -> GroundState:
    """Minimize the scalar quotient ||w||^2 / (int |x|^alpha |w|^r)^(2/r).

    Args:
        config (ProblemConfig): The problem configuration.
        r (float): The exponent, in (2, 2*_s) unless degeneration runs are enabled.
        alpha (Optional[float], optional): The weight exponent. Defaults to the configured one.
        opts (Optional[SolverOptions], optional): Solver options. Defaults to SolverOptions().
        initial (Optional[Sequence[SpectralField]], optional): A warm start (w,). Defaults to the initial bump.

    Raises:
        CriticalExponent: If r >= 2*_s without the degeneration flag.
        NotConverged: If the solver does not converge; carries the last iterate.

    Returns:
        GroundState: The minimizer, with v = None.
    """
    opts = opts or SolverOptions()
    alpha = config.alpha if alpha is None else alpha
    _check_exponent(r, config, opts)

    basis = make_basis(config)
    problem = ScalarProblem(basis, alpha, config.s, r)
    return _solve(problem, config, opts, _initial_fields(basis, opts, 1, initial))


def minimize_system(
    config: ProblemConfig,
    exp: ExponentConfig,
    alpha: Optional[float] = None,
    opts: Optional[SolverOptions] = None,
    initial: Optional[Sequence[SpectralField]] = None,
) -> GroundState:
    """Minimize the system quotient (||u||^2 + ||v||^2) / (int |x|^alpha |u|^p |v|^q)^(2/(p+q)).

    Args:
        config (ProblemConfig): The problem configuration.
        exp (ExponentConfig): The exponents, with 2 < p + q < 2*_s unless degeneration runs are enabled.
        alpha (Optional[float], optional): The weight exponent. Defaults to the configured one.
        opts (Optional[SolverOptions], optional): Solver options. Defaults to SolverOptions().
        initial (Optional[Sequence[SpectralField]], optional): A warm start (u, v). Defaults to the initial bump.

    Raises:
        CriticalExponent: If p + q >= 2*_s without the degeneration flag.
        NotConverged: If the solver does not converge; carries the last iterate.

    Returns:
        GroundState: The minimizer.
    """
    opts = opts or SolverOptions()
    alpha = config.alpha if alpha is None else alpha
    _check_exponent(exp.total, config, opts)

    basis = make_basis(config)
    problem = SystemProblem(basis, alpha, config.s, exp)
    return _solve(problem, config, opts, _initial_fields(basis, opts, 2, initial))


def problem_for(state: GroundState) -> VariationalProblem:
    """The variational problem that a state solves.

    Args:
        state (GroundState): The state.

    Returns:
        VariationalProblem: The scalar or system problem.
    """
    basis = state.u.basis

    if state.is_system:
        return SystemProblem(basis, state.alpha, state.config.s, state.exponents)

    return ScalarProblem(basis, state.alpha, state.config.s, state.exponent)


def synthesize_system_from_scalar(w0: GroundState, exp: ExponentConfig) -> GroundState:
    """Build the system minimizer (B w0, C w0) from a scalar minimizer at r = p + q, with B = sqrt(p/q) C.

    C is chosen so that the mixed integral equals 1; the system quotient is then C_{p,q} times the scalar one.

    Args:
        w0 (GroundState): A scalar state at the exponent p + q.
        exp (ExponentConfig): The exponents.

    Raises:
        ConfigurationError: If w0 is not a scalar state at the exponent p + q.

    Returns:
        GroundState: The system state.
    """
    if w0.is_system or abs(w0.exponent - exp.total) > CRITICAL_TOLERANCE * exp.total:
        raise ConfigurationError(f"Expected a scalar state at exponent {exp.total}, got {w0.exponent}.")

    w = w0.u * power_term(w0.u, exp.total, w0.alpha) ** (-1 / exp.total)

    c_factor = (exp.p / exp.q) ** (-exp.p / (2 * exp.total))
    b_factor = np.sqrt(exp.p / exp.q) * c_factor

    u = b_factor * w
    v = c_factor * w

    problem = SystemProblem(w.basis, w0.alpha, w0.config.s, exp)
    quotient = problem.quotient((u, v))
    multiplier = problem.multiplier((u, v))

    return replace(
        w0,
        u=u,
        v=v,
        quotient=quotient,
        multiplier=multiplier,
        beta=lagrange_factor(exp.total, multiplier),
        residual_norm=problem.stationarity((u, v)),
        exponents=exp,
        rescaled=False,
        quotient_history=(quotient,),
    )


def lagrange_factor(exponent: float, multiplier: float) -> float:
    """The scaling beta = (r multiplier / 2)^{1/(r-2)}, which turns a constrained minimizer into a weak solution.

    Args:
        exponent (float): The total exponent r = p + q.
        multiplier (float): The Lagrange multiplier.

    Returns:
        float: beta.
    """
    return (exponent * multiplier / 2) ** (1 / (exponent - 2))


def lagrange_rescale(state: GroundState) -> GroundState:
    """Scale a constrained minimizer by beta, into a weak solution of the Henon system.

    Args:
        state (GroundState): A state on the constraint manifold.

    Returns:
        GroundState: The rescaled state; its residual_norm is the system residual. Rescaled states are returned
            unchanged.
    """
    if state.rescaled:
        return state

    u = state.beta * state.u
    v = None if state.v is None else state.beta * state.v

    rescaled = replace(state, u=u, v=v, rescaled=True)
    return replace(rescaled, residual_norm=residual(rescaled))


def residual(
    state: GroundState,
    exp: Optional[ExponentConfig] = None,
    alpha: Optional[float] = None,
    s: Optional[float] = None,
) -> float:
    """The relative coefficient-space residual of the Henon system (or of the scalar equation).

    Args:
        state (GroundState): The state.
        exp (Optional[ExponentConfig], optional): The exponents. Defaults to those of the state.
        alpha (Optional[float], optional): The weight exponent. Defaults to that of the state.
        s (Optional[float], optional): The fractional order. Defaults to that of the state.

    Returns:
        float: ||(-Delta)^s f - RHS(f)|| / ||(-Delta)^s f||, zero for vanishing fields.
    """
    alpha = state.alpha if alpha is None else alpha
    s = state.config.s if s is None else s

    if state.is_system:
        components = gradient_pair(state.u, state.v, exp or state.exponents, alpha, s)

    else:
        exponent = state.exponent if exp is None else exp.total
        components = (scalar_gradient(state.u, exponent, alpha, s),)

    numerator = sum(float(np.sum(component.coeffs**2)) for component in components)
    denominator = sum(float(np.sum(frac_laplacian(field, s).coeffs ** 2)) for field in state.fields)

    if denominator == 0:
        return 0.0

    return float(np.sqrt(numerator / denominator))


def multiplier_estimates(state: GroundState) -> MultiplierEstimates:
    """Estimate the Lagrange multiplier from the energy identity and by least squares.

    Args:
        state (GroundState): The state.

    Returns:
        MultiplierEstimates: Both estimates.
    """
    problem = problem_for(state)
    derivatives = problem.constraint_gradient(state.fields)
    eigenvalues = state.u.basis.eigenvalues

    # <(-Delta)^s f, g> in H^{-s} is the plain coefficient product <f, g>.
    projection = sum(
        float(np.dot(field.coeffs, derivative.coeffs)) for field, derivative in zip(state.fields, derivatives)
    )
    norm = sum(float(np.sum(derivative.coeffs**2 / eigenvalues**problem.s)) for derivative in derivatives)

    return MultiplierEstimates(energy=problem.multiplier(state.fields), least_squares=projection / norm)


def energy_identity_defect(state: GroundState) -> float:
    """The defect of the energy identity ||u||^2 + ||v||^2 = 2 int |x|^alpha u^p v^q, after Lagrange rescaling.

    Args:
        state (GroundState): The state.

    Returns:
        float: The relative defect.
    """
    rescaled = lagrange_rescale(state)
    problem = problem_for(rescaled)

    energy = problem.energy(rescaled.fields)
    return abs(energy - 2 * problem.constraint(rescaled.fields)) / energy
