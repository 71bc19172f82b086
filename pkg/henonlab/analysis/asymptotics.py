"""Exponent sweeps toward the critical exponent, and the concentration diagnostics of their ground states.

For p_eps + q approaching 2*_s, the Lagrange-rescaled ground states blow up: their peaks M_1, M_2 grow, the peak
location x_eps approaches the boundary, and near x_eps the solutions look like bubbles of scale
lambda_eps = M_1^{-2/(N-2s)}. The functions of this module measure these quantities on solved states.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from henonlab.helper.conversion import clamp, relative_difference
from henonlab.helper.errors import ConfigurationError, NumericalFailure
from henonlab.helper.settings import worker_count
from henonlab.optimization.solver import (
    GroundState,
    NotConverged,
    SolverOptions,
    lagrange_rescale,
    minimize_scalar,
    minimize_system,
)
from henonlab.spectral.bubbles import FitDegenerate, ProfileFit, bubble_U, fit_profile, radial_cutoff
from henonlab.spectral.core import ProblemConfig, SpectralField, hs_norm, tail_energy, to_coefficients
from henonlab.spectral.energy import ExponentConfig, cpq
from henonlab.spectral.extension import extend, theta_profile

# A logger for this module
logger = logging.getLogger(__name__)

# Radius of the mass fraction, recorded with every sweep point.
MASS_RADIUS = 0.2

# Largest support radius of the remainder cutoff.
REMAINDER_RADIUS = 0.25

# The minimal ratio d_eps / lambda_eps for a rescaled window.
MIN_WINDOW = 4.0

# Number of samples of a rescaled window.
WINDOW_SAMPLES = 801

# Relative overshoot, by which the extension may exceed the trace maximum.
EXTENSION_TOLERANCE = 1e-8

# Number of sweep records, over which trends are judged.
TAIL_LENGTH = 4


class WindowTooSmall(NumericalFailure):
    """Custom exception for rescaled windows that are shorter than a few concentration scales."""


@dataclass(frozen=True)
class SweepPlan:
    """A sweep over p_eps, increasing toward 2*_s - q, at fixed q."""

    q: float
    p_values: Tuple[float, ...]
    config: ProblemConfig
    options: SolverOptions = field(default_factory=SolverOptions)

    # Seed each solve with the previous minimizer. Warm-started sweeps are sequential.
    warm_start: bool = False

    def __post_init__(self):
        """Validate the plan."""
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))

        if not self.p_values:
            raise ConfigurationError("A sweep needs at least one exponent.")

        if any(p <= 1 for p in self.p_values) or self.q <= 1:
            raise ConfigurationError("All exponents must exceed 1.")

        if any(p + self.q >= self.config.crit_exp for p in self.p_values):
            raise ConfigurationError(f"All p + q must lie below the critical exponent {self.config.crit_exp}.")

        if any(later <= earlier for earlier, later in zip(self.p_values, self.p_values[1:])):
            raise ConfigurationError("The exponents of a sweep must be strictly increasing.")

    def exponents(self, p: float) -> ExponentConfig:
        """The exponent configuration of a sweep point.

        Args:
            p (float): The exponent p_eps.

        Returns:
            ExponentConfig: (p_eps, q).
        """
        return ExponentConfig(p, self.q, self.config.crit_exp)


@dataclass(frozen=True)
class SweepRecord:
    """Concentration diagnostics of one sweep point."""

    p_eps: float
    q: float
    quotient: float
    multiplier: float
    M1: float
    M2: float
    ratio: float
    x_max: float
    d_eps: float
    lambda_eps: float
    d_over_lambda: float
    h_eps: float
    remainder_rel: float
    amp_ratio_fit: float
    iterations: int
    converged: bool

    # Diagnostics beyond the table columns.
    lambda_bar: float = math.nan
    mass_fraction: float = math.nan
    tail_energy: float = math.nan
    extension_peak_ratio: float = math.nan
    cutoff_radius: float = math.nan
    fit: Optional[ProfileFit] = field(default=None, repr=False, compare=False)
    state: Optional[GroundState] = field(default=None, repr=False, compare=False)

    @classmethod
    def columns(cls) -> List[str]:
        """The names of the table columns, in order."""
        return [item.name for item in fields(cls)][:16]

    def row(self) -> list:
        """The values of the table columns, in order."""
        return [getattr(self, name) for name in self.columns()]

    @classmethod
    def failed(cls, p_eps: float, q: float) -> "SweepRecord":
        """A record for a sweep point without any usable iterate.

        Args:
            p_eps (float): The exponent p_eps.
            q (float): The exponent q.

        Returns:
            SweepRecord: The record, with undefined diagnostics.
        """
        nan = math.nan
        return cls(p_eps, q, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, 0, False)


def record_algebra(
    M1: float, M2: float, p: float, q: float, config: ProblemConfig
) -> Tuple[float, float, float, float]:
    """The derived quantities of a record.

    Args:
        M1 (float): The peak of u.
        M2 (float): The peak of v.
        p (float): The exponent p_eps.
        q (float): The exponent q.
        config (ProblemConfig): The problem configuration.

    Returns:
        Tuple[float, float, float, float]: lambda_eps = M1^{-2/(N-2s)}, h_eps = lambda^{N - (N-2s)(p+q)/2} in (0, 1],
            the ratio M1 / M2 and lambda_bar = M2^{-2/(N-2s)}.
    """
    gap = config.N - 2 * config.s
    lambda_eps = M1 ** (-2 / gap)
    lambda_bar = M2 ** (-2 / gap)

    h_eps = lambda_eps ** (config.N - gap * (p + q) / 2)

    if h_eps > 1:
        logger.warning("h(eps)=%.6g exceeds 1 for a peak below 1 (M1=%.6g); clamped.", h_eps, M1)

    h_eps = clamp(h_eps, np.finfo(float).tiny, 1.0)

    return lambda_eps, h_eps, M1 / M2, lambda_bar


def locate_peak(field: SpectralField) -> Tuple[float, float]:
    """Locate the maximum of a trace: grid argmax, refined by the vertex of the parabola through three nodes.

    Among equal grid maxima, the one with nonnegative x is taken.

    Args:
        field (SpectralField): The trace.

    Returns:
        Tuple[float, float]: The location and the spectrally evaluated peak value.
    """
    nodes = field.basis.nodes
    samples = field.samples

    candidates = np.flatnonzero(samples >= samples.max() * (1 - 1e-12))
    nonnegative = candidates[nodes[candidates] >= 0]
    pool = nonnegative if len(nonnegative) else candidates
    index = int(pool[np.argmax(samples[pool])])

    location = float(nodes[index])

    if 0 < index < len(nodes) - 1:
        x = nodes[index - 1 : index + 2]
        y = samples[index - 1 : index + 2]
        curvature, slope, _ = np.polyfit(x, y, 2)

        if curvature < 0:
            location = float(np.clip(-slope / (2 * curvature), x[0], x[-1]))

    return location, float(field.evaluate(location))


def rescaled_window(
    field: SpectralField, center: float, scale: float, half_width: float, config: ProblemConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """Sample the blow-up lambda^{(N-2s)/2} f(center + lambda xi) on |xi| <= half_width / lambda.

    Args:
        field (SpectralField): The trace.
        center (float): The peak location.
        scale (float): The concentration scale lambda.
        half_width (float): The half width of the window in x.
        config (ProblemConfig): The problem configuration.

    Raises:
        WindowTooSmall: If the window spans fewer than 4 concentration scales.

    Returns:
        Tuple[np.ndarray, np.ndarray]: The window coordinates xi and the rescaled samples.
    """
    extent = half_width / scale

    if 2 * extent < MIN_WINDOW:
        raise WindowTooSmall(f"The window covers only {2 * extent:.3g} concentration scales.")

    xi = np.linspace(-extent, extent, WINDOW_SAMPLES)
    values = scale ** ((config.N - 2 * config.s) / 2) * field.evaluate(center + scale * xi)

    return xi, values


def _window_fit(u: SpectralField, v: SpectralField, record: SweepRecord, config: ProblemConfig) -> ProfileFit:
    """Fit bubbles to the rescaled traces, on the window |xi| <= d_eps / (2 lambda_eps).

    Args:
        u (SpectralField): The first trace.
        v (SpectralField): The second trace.
        record (SweepRecord): The record with peak location and scales.
        config (ProblemConfig): The problem configuration.

    Returns:
        ProfileFit: The fit.
    """
    xi, u_window = rescaled_window(u, record.x_max, record.lambda_eps, record.d_eps / 2, config)
    _, v_window = rescaled_window(v, record.x_max, record.lambda_eps, record.d_eps / 2, config)

    return fit_profile(xi, u_window, v_window, config)


def _extension_peak_ratio(field: SpectralField, peak: float, config: ProblemConfig) -> float:
    """The largest value of the extension on 100 cylinder points, relative to the trace maximum.

    Args:
        field (SpectralField): The trace.
        peak (float): The trace maximum.
        config (ProblemConfig): The problem configuration.

    Returns:
        float: max w / peak, which does not exceed 1 for nonnegative traces.
    """
    x, y = np.meshgrid(np.linspace(-0.95, 0.95, 10), np.geomspace(1e-3, 1.0, 10))
    values = extend(field, theta_profile(config.s))(x, y)

    return float(values.max() / peak)


def mass_fraction(state: GroundState, center: float, radius: float, exp: ExponentConfig, alpha: float) -> float:
    """The share of int |x|^alpha |u|^p |v|^q carried by {|x - center| < radius}.

    Args:
        state (GroundState): The state.
        center (float): The center of the ball.
        radius (float): The radius, positive.
        exp (ExponentConfig): The exponents.
        alpha (float): The weight exponent.

    Returns:
        float: The fraction in [0, 1].
    """
    if radius <= 0:
        raise ConfigurationError(f"The radius {radius} must be positive.")

    basis = state.u.basis
    v_samples = state.v.samples if state.v is not None else state.u.samples

    density = basis.weights * basis.weight_power(alpha) * np.abs(state.u.samples) ** exp.p * np.abs(v_samples) ** exp.q
    total = float(np.sum(density))

    if total == 0:
        return 0.0

    inside = np.abs(basis.nodes - center) < radius
    return float(np.sum(density[inside]) / total)


def bubble_remainder(
    state: GroundState, record: SweepRecord, config: ProblemConfig, fit: Optional[ProfileFit] = None
) -> float:
    """The relative H^s norm of phi (u - bubble_u, v - bubble_v), with bubbles matched to the peak.

    The bubbles are M1 a U((x - x_c) / (lambda t)) and M1 b U((x - x_c) / (lambda t)), with scale t, center
    x_c = x_max + lambda c and amplitudes from the profile fit; without a fit, a = b M1/M2 = 1, t = 1, c = 0. The
    cutoff phi is centered at x_max, with support radius min(0.25, d_eps / 2).

    Args:
        state (GroundState): The rescaled state.
        record (SweepRecord): The record of the state.
        config (ProblemConfig): The problem configuration.
        fit (Optional[ProfileFit], optional): The profile fit. Defaults to None.

    Raises:
        NumericalFailure: If the cutoff radius, the peak values or the localized traces vanish.

    Returns:
        float: The relative remainder.
    """
    radius = min(REMAINDER_RADIUS, record.d_eps / 2)

    if not radius > 0:
        raise NumericalFailure(f"The remainder cutoff radius {radius:.3g} vanishes; the peak sits on the boundary.")

    if not (record.ratio > 0 and record.lambda_eps > 0):
        raise NumericalFailure("The peak values vanish; the bubbles cannot be matched.")

    if radius < REMAINDER_RADIUS:
        logger.debug("Remainder cutoff radius shrunk to %.4g.", radius)

    if fit is None:
        amplitudes, scale, center = (1.0, 1 / record.ratio), 1.0, 0.0

    else:
        amplitudes, scale, center = (fit.a, fit.b), fit.scale, fit.center

    basis = state.u.basis
    shifted = basis.nodes - record.x_max - record.lambda_eps * center
    profile = bubble_U(shifted / (record.lambda_eps * scale), config.N, config.s)
    weights = radial_cutoff(basis.nodes, record.x_max, radius)

    remainder = 0.0
    reference = 0.0

    for trace, amplitude in zip((state.u, state.v), amplitudes):
        difference = to_coefficients(weights * (trace.samples - record.M1 * amplitude * profile), basis)
        localized = to_coefficients(weights * trace.samples, basis)

        remainder += hs_norm(difference, config.s) ** 2
        reference += hs_norm(localized, config.s) ** 2

    if not reference > 0:
        raise NumericalFailure("The traces vanish inside the remainder cutoff; the relative remainder is undefined.")

    return float(np.sqrt(remainder / reference))


def diagnostics(state: GroundState, config: ProblemConfig) -> SweepRecord:
    """Compute the concentration diagnostics of a system state, on its Lagrange rescaling.

    Args:
        state (GroundState): A system state with positive traces.
        config (ProblemConfig): The problem configuration.

    Returns:
        SweepRecord: The record; diagnostics that cannot be evaluated are NaN.
    """
    if not state.is_system:
        raise ConfigurationError("Concentration diagnostics need a system state.")

    rescaled = lagrange_rescale(state)
    exp = state.exponents

    x_max, M1 = locate_peak(rescaled.u)
    _, M2 = locate_peak(rescaled.v)

    lambda_eps, h_eps, ratio, lambda_bar = record_algebra(M1, M2, exp.p, exp.q, config)
    d_eps = 1 - abs(x_max)

    record = SweepRecord(
        p_eps=exp.p,
        q=exp.q,
        quotient=state.quotient,
        multiplier=state.multiplier,
        M1=M1,
        M2=M2,
        ratio=ratio,
        x_max=x_max,
        d_eps=d_eps,
        lambda_eps=lambda_eps,
        d_over_lambda=d_eps / lambda_eps,
        h_eps=h_eps,
        remainder_rel=math.nan,
        amp_ratio_fit=math.nan,
        iterations=state.iterations,
        converged=state.converged,
        lambda_bar=lambda_bar,
        mass_fraction=mass_fraction(rescaled, x_max, MASS_RADIUS, exp, state.alpha),
        tail_energy=max(tail_energy(rescaled.u, config.s), tail_energy(rescaled.v, config.s)),
        extension_peak_ratio=_extension_peak_ratio(rescaled.u, M1, config),
        cutoff_radius=min(REMAINDER_RADIUS, d_eps / 2),
        state=rescaled,
    )

    if record.extension_peak_ratio > 1 + EXTENSION_TOLERANCE:
        logger.warning("Extension exceeds the trace maximum by a factor %.12g.", record.extension_peak_ratio)

    try:
        fit = _window_fit(rescaled.u, rescaled.v, record, config)

    except (WindowTooSmall, FitDegenerate) as error:
        logger.warning("No profile fit at p=%.6g: %s", exp.p, error)
        return replace(record, remainder_rel=bubble_remainder(rescaled, record, config))

    return replace(
        record,
        amp_ratio_fit=fit.amplitude_ratio,
        remainder_rel=bubble_remainder(rescaled, record, config, fit),
        fit=fit,
    )


def _solve_point(plan: SweepPlan, p: float, initial: Optional[GroundState] = None) -> GroundState:
    """Solve one sweep point; unconverged solves return their last iterate.

    Args:
        plan (SweepPlan): The plan.
        p (float): The exponent p_eps.
        initial (Optional[GroundState], optional): A warm start. Defaults to None.

    Returns:
        GroundState: The state, possibly flagged unconverged.
    """
    warm = None if initial is None else initial.fields

    try:
        return minimize_system(plan.config, plan.exponents(p), opts=plan.options, initial=warm)

    except NotConverged as error:
        return error.state


def _record_point(plan: SweepPlan, p: float, state: Optional[GroundState]) -> SweepRecord:
    """Diagnose one sweep point.

    Args:
        plan (SweepPlan): The plan.
        p (float): The exponent p_eps.
        state (Optional[GroundState]): The state, if the solve produced one.

    Returns:
        SweepRecord: The record.
    """
    if state is None:
        return SweepRecord.failed(p, plan.q)

    try:
        return diagnostics(state, plan.config)

    except NumericalFailure as error:
        logger.warning("Diagnostics failed at p=%.6g: %s", p, error)
        return replace(SweepRecord.failed(p, plan.q), quotient=state.quotient, iterations=state.iterations)


def run_sweep(plan: SweepPlan, threads: Optional[int] = None) -> List[SweepRecord]:
    """Solve and diagnose every point of a sweep.

    Without warm starts, points are solved concurrently; records are ordered by plan index in any case.

    Args:
        plan (SweepPlan): The plan.
        threads (Optional[int], optional): The number of workers. Defaults to the HENON_THREADS setting.

    Returns:
        List[SweepRecord]: One record per exponent; failed solves are flagged unconverged.
    """
    logger.info(
        "Sweeping %d exponents p in [%.6g, %.6g] at q=%.6g.",
        len(plan.p_values),
        plan.p_values[0],
        plan.p_values[-1],
        plan.q,
    )

    def solve(p: float, initial: Optional[GroundState] = None) -> Optional[GroundState]:
        try:
            return _solve_point(plan, p, initial)

        except NumericalFailure as error:
            logger.warning("Solve failed at p=%.6g: %s", p, error)
            return None

    if plan.warm_start:
        states: List[Optional[GroundState]] = []
        previous = None

        for p in plan.p_values:
            state = solve(p, previous)
            states.append(state)
            previous = state if state is not None else previous

    else:
        with ThreadPoolExecutor(max_workers=threads or worker_count()) as executor:
            states = list(executor.map(solve, plan.p_values))

    records = [_record_point(plan, p, state) for p, state in zip(plan.p_values, states)]

    unconverged = sum(not record.converged for record in records)

    if unconverged:
        logger.warning("%d of %d sweep points did not converge.", unconverged, len(records))

    return records


def _strictly_monotone(values: Sequence[float], increasing: bool) -> bool:
    """Whether a sequence is strictly monotone."""
    pairs = list(zip(values, values[1:]))
    return all((later > earlier) if increasing else (later < earlier) for earlier, later in pairs)


@dataclass(frozen=True)
class TrendReport:
    """Monotone trends over the tail of a sweep."""

    M1_increasing: bool
    d_eps_decreasing: bool
    d_over_lambda_increasing: bool
    remainder_decreasing: bool
    mass_fraction_increasing: bool
    final_mass_fraction: float

    @property
    def passed(self) -> bool:
        """Whether all trends hold and the final mass fraction reaches 0.9."""
        return (
            self.M1_increasing
            and self.d_eps_decreasing
            and self.d_over_lambda_increasing
            and self.remainder_decreasing
            and self.mass_fraction_increasing
            and self.final_mass_fraction >= 0.9
        )


def sweep_trends(records: Sequence[SweepRecord], tail: int = TAIL_LENGTH) -> TrendReport:
    """Judge the concentration trends over the last records of a sweep.

    Args:
        records (Sequence[SweepRecord]): The records.
        tail (int, optional): The number of final records. Defaults to 4.

    Returns:
        TrendReport: The trends.
    """
    last = list(records)[-tail:]

    return TrendReport(
        M1_increasing=_strictly_monotone([r.M1 for r in last], True),
        d_eps_decreasing=_strictly_monotone([r.d_eps for r in last], False),
        d_over_lambda_increasing=_strictly_monotone([r.d_over_lambda for r in last], True),
        remainder_decreasing=_strictly_monotone([r.remainder_rel for r in last], False),
        mass_fraction_increasing=_strictly_monotone([r.mass_fraction for r in last], True),
        final_mass_fraction=last[-1].mass_fraction,
    )


@dataclass(frozen=True)
class IdentityReport:
    """The scalar-to-system identity S_sys = C_{p,q} S_scal, measured by two independent solves."""

    p: float
    q: float
    alpha: float
    system_quotient: float
    scalar_quotient: float
    cpq: float

    # |S_sys - C_{p,q} S_scal| / S_sys.
    deviation: float

    # max |u/v - sqrt(p/q)| / sqrt(p/q), where v > 1e-6 M2.
    ratio_deviation: float

    converged: bool

    @property
    def quotient_ratio(self) -> float:
        """S_sys / S_scal."""
        return self.system_quotient / self.scalar_quotient

    @property
    def passed(self) -> bool:
        """Whether both solves converged, the identity holds to 1e-3, and u/v is constant to 1 %."""
        return self.converged and self.deviation <= 1e-3 and self.ratio_deviation < 1e-2


def identity_check(
    config: ProblemConfig, p: float, q: float, alpha: float, opts: Optional[SolverOptions] = None
) -> IdentityReport:
    """Solve the scalar problem at r = p + q and the system problem, and compare their minima.

    Args:
        config (ProblemConfig): The problem configuration.
        p (float): The exponent p.
        q (float): The exponent q.
        alpha (float): The weight exponent.
        opts (Optional[SolverOptions], optional): Solver options. Defaults to SolverOptions().

    Raises:
        NotConverged: If a solve does not converge.

    Returns:
        IdentityReport: The comparison.
    """
    exp = ExponentConfig(p, q, config.crit_exp)

    if not exp.is_subcritical:
        raise ConfigurationError(f"The identity check needs a subcritical pair, got p+q={exp.total}.")

    scalar = minimize_scalar(config, exp.total, alpha, opts)
    system = minimize_system(config, exp, alpha, opts)

    target = np.sqrt(p / q)
    u_samples, v_samples = system.u.samples, system.v.samples
    significant = v_samples > 1e-6 * v_samples.max()
    ratio_deviation = float(np.max(np.abs(u_samples[significant] / v_samples[significant] - target)) / target)

    report = IdentityReport(
        p=p,
        q=q,
        alpha=alpha,
        system_quotient=system.quotient,
        scalar_quotient=scalar.quotient,
        cpq=exp.cpq,
        deviation=abs(system.quotient - exp.cpq * scalar.quotient) / system.quotient,
        ratio_deviation=ratio_deviation,
        converged=scalar.converged and system.converged,
    )

    logger.info("Identity check p=%.4g, q=%.4g, alpha=%.4g: deviation %.3g.", p, q, alpha, report.deviation)
    return report


@dataclass(frozen=True)
class CriticalityReport:
    """Gaps between sweep quotients and the critical limit C_{p,q} S-hat."""

    S_hat: float
    gaps: List[float]

    # Gaps relative to C_{p,q} S-hat.
    relative_gaps: List[float]

    # Whether the gaps decrease strictly over the sweep tail.
    shrinking: bool

    @property
    def final_relative_gap(self) -> float:
        """The relative gap of the last record."""
        return self.relative_gaps[-1] if self.relative_gaps else math.nan


def criticality_limit_check(records: Sequence[SweepRecord], S_hat: float) -> CriticalityReport:
    """Compare the sweep quotients with their critical limit C_{p_eps,q} S-hat.

    Args:
        records (Sequence[SweepRecord]): The sweep records; unconverged ones are skipped.
        S_hat (float): The estimate of the best Sobolev constant.

    Returns:
        CriticalityReport: The gaps, and whether they shrink.
    """
    converged = [record for record in records if record.converged]

    limits = [cpq(record.p_eps, record.q) * S_hat for record in converged]
    gaps = [abs(record.quotient - limit) for record, limit in zip(converged, limits)]
    relative_gaps = [gap / limit for gap, limit in zip(gaps, limits)]

    if len(converged) < TAIL_LENGTH:
        logger.warning("Only %d converged records; the gap trend is not judged.", len(converged))
        shrinking = False

    else:
        shrinking = _strictly_monotone(gaps[-TAIL_LENGTH:], False)

    return CriticalityReport(S_hat=S_hat, gaps=gaps, relative_gaps=relative_gaps, shrinking=shrinking)


@dataclass(frozen=True)
class ProfileConvergenceReport:
    """Convergence of the rescaled sweep solutions to a bubble pair."""

    amplitude_ratios: List[float]

    # The predicted amplitude ratios sqrt(p_eps / q).
    targets: List[float]

    residuals: List[float]

    # max |u~(xi) - u~(-xi)| / max u~ on each window.
    symmetry_defects: List[float]

    # lambda_eps / lambda_bar_eps, which stays bounded.
    scale_ratios: List[float]

    @property
    def ratio_errors(self) -> List[float]:
        """Relative errors of the amplitude ratios."""
        return [relative_difference(ratio, target) for ratio, target in zip(self.amplitude_ratios, self.targets)]

    @property
    def symmetry_decreasing(self) -> bool:
        """Whether the symmetry defect decreases over the last three records."""
        return _strictly_monotone(self.symmetry_defects[-3:], False)


def profile_convergence(records: Sequence[SweepRecord], config: ProblemConfig) -> ProfileConvergenceReport:
    """Fit bubbles to the rescaled states of a sweep, and measure amplitude ratios and symmetry defects.

    Args:
        records (Sequence[SweepRecord]): Records that carry their rescaled states.
        config (ProblemConfig): The problem configuration.

    Raises:
        WindowTooSmall: If d_eps / lambda_eps < 4 for a record.

    Returns:
        ProfileConvergenceReport: The report.
    """
    usable = [record for record in records if record.state is not None and math.isfinite(record.M1)]

    if len(usable) < 2:
        raise ConfigurationError("Profile convergence needs at least two diagnosed records.")

    report = ProfileConvergenceReport([], [], [], [], [])

    for record in usable:
        u, v = record.state.u, record.state.v
        fit = record.fit or _window_fit(u, v, record, config)

        _, window = rescaled_window(u, record.x_max, record.lambda_eps, record.d_eps / 2, config)

        report.amplitude_ratios.append(fit.amplitude_ratio)
        report.targets.append(float(np.sqrt(record.p_eps / record.q)))
        report.residuals.append(fit.residual)
        report.symmetry_defects.append(float(np.max(np.abs(window - window[::-1])) / np.max(window)))
        report.scale_ratios.append(record.lambda_eps / record.lambda_bar)

    return report


@dataclass(frozen=True)
class DegenerationReport:
    """Critical-exponent solves over increasing truncations."""

    modes: List[int]
    quotients: List[float]
    peaks: List[float]
    converged: List[bool]

    @property
    def quotient_decreasing(self) -> bool:
        """Whether the quotients decrease strictly with the resolution."""
        return _strictly_monotone(self.quotients, False)

    @property
    def peak_increasing(self) -> bool:
        """Whether the peaks increase strictly with the resolution."""
        return _strictly_monotone(self.peaks, True)

    @property
    def plateau(self) -> bool:
        """Whether two consecutive quotients agree to 1e-3, i.e. the minimum appears attained."""
        pairs = zip(self.quotients, self.quotients[1:])
        return any(relative_difference(later, earlier) < 1e-3 for earlier, later in pairs)

    @property
    def passed(self) -> bool:
        """Whether the solves show the signature of non-attainment."""
        return self.quotient_decreasing and self.peak_increasing and not self.plateau


def degeneration_check(
    config: ProblemConfig,
    r: Optional[float] = None,
    alpha: Optional[float] = None,
    modes_list: Sequence[int] = (128, 256, 512),
    opts: Optional[SolverOptions] = None,
) -> DegenerationReport:
    """Solve the scalar problem at the critical exponent over increasing truncations.

    Args:
        config (ProblemConfig): The problem configuration.
        r (Optional[float], optional): The exponent. Defaults to the critical exponent.
        alpha (Optional[float], optional): The weight exponent. Defaults to the configured one.
        modes_list (Sequence[int], optional): The truncations. Defaults to (128, 256, 512).
        opts (Optional[SolverOptions], optional): Solver options; the degeneration flag is set. Defaults to None.

    Returns:
        DegenerationReport: Quotients and constraint-normalized peaks per truncation.
    """
    r = config.crit_exp if r is None else r
    opts = replace(opts or SolverOptions(), allow_critical=True)

    report = DegenerationReport([], [], [], [])

    for modes in modes_list:
        try:
            state = minimize_scalar(config.with_modes(modes), r, alpha, opts)

        except NotConverged as error:
            state = error.state

        report.modes.append(modes)
        report.quotients.append(state.quotient)
        report.peaks.append(locate_peak(state.u)[1])
        report.converged.append(state.converged)

    logger.info("Degeneration check at r=%.6g: quotients %s, peaks %s.", r, report.quotients, report.peaks)
    return report


@dataclass(frozen=True)
class MeasureBoundReport:
    """The energy-mass inequality mu >= C_{p,q} S-hat gamma^{2/2*_s} at a concentration point."""

    # The energy ||u||^2 + ||v||^2 of the rescaled solution.
    energy: float

    # The constraint mass near the concentration point.
    gamma: float

    bound: float

    @property
    def holds(self) -> bool:
        """Whether the inequality holds."""
        return self.energy >= self.bound


def measure_bound_check(
    record: SweepRecord, mass: float, S_hat: float, config: Optional[ProblemConfig] = None
) -> MeasureBoundReport:
    """Check the energy-mass inequality of a rescaled sweep solution.

    The rescaled solution has energy beta^2 S and constraint mass beta^{p+q}, with beta^{p+q-2} = S / 2.

    Args:
        record (SweepRecord): The record.
        mass (float): The share of the constraint mass at the concentration point, in [0, 1].
        S_hat (float): The estimate of the best Sobolev constant.
        config (Optional[ProblemConfig], optional): The problem configuration. Defaults to that of the record's state.

    Returns:
        MeasureBoundReport: The two sides of the inequality.
    """
    if config is None:
        if record.state is None:
            raise ConfigurationError("The measure bound needs a problem configuration.")

        config = record.state.config

    total = record.p_eps + record.q
    beta = (record.quotient / 2) ** (1 / (total - 2))

    energy = beta**2 * record.quotient
    gamma = mass * beta**total
    bound = cpq(record.p_eps, record.q) * S_hat * gamma ** (2 / config.crit_exp)

    return MeasureBoundReport(energy=energy, gamma=gamma, bound=bound)
