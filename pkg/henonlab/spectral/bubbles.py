"""Explicit critical profiles: the bubble U, its dilates U_eps, truncated bubbles, Kelvin transforms and profile fits.

The truncated bubbles phi * U_eps(. - x0) are concentrated near the boundary point 1 of B, with x0 = 1 - 1/|ln eps|.
Their critical quotients approach the best Sobolev constant as eps -> 0, with an error of the order of the bubble
energy outside the cutoff plateau, (eps ln^2 eps)^{(N-2s)/2}.
"""
import logging
from dataclasses import dataclass
from typing import Callable, List, Union

import numpy as np
from scipy.optimize import least_squares
from scipy.special import gamma

from henonlab.helper.errors import ConfigurationError, NumericalFailure
from henonlab.helper.extrapolation import check_monotone, linear_gauge_limit
from henonlab.spectral.core import BasisSpec, ProblemConfig, SpectralField, make_basis, tail_energy, to_coefficients
from henonlab.spectral.energy import quotient_scalar

# A logger for this module
logger = logging.getLogger(__name__)

# The minimal number of window samples above half of the peak, for a profile fit.
MIN_FIT_POINTS = 8

# Admissible relative increase between consecutive truncated-bubble quotients.
MONOTONE_TOLERANCE = 1e-9

Profile = Callable[[np.ndarray], np.ndarray]


class CutoffEscapesDomain(NumericalFailure):
    """Custom exception for cutoff supports that cross the boundary of the ball."""


class PoleSingularity(NumericalFailure):
    """Custom exception for Kelvin transforms evaluated at their pole."""


class FitDegenerate(NumericalFailure):
    """Custom exception for profile fits on windows that do not resolve the peak."""


def _radius_squared(x: Union[float, np.ndarray], N: int) -> np.ndarray:
    """|x|^2 for points on the line (N = 1) or in R^N, with coordinates along the last axis.

    Args:
        x (Union[float, np.ndarray]): The points.
        N (int): The dimension.

    Returns:
        np.ndarray: The squared radii.
    """
    x = np.asarray(x, dtype=float)

    if N == 1:
        return x**2

    return np.sum(x**2, axis=-1)


def bubble_U(x: Union[float, np.ndarray], N: int, s: float) -> np.ndarray:
    """The bubble U(x) = (1 + |x|^2)^{(2s-N)/2}.

    Args:
        x (Union[float, np.ndarray]): The points.
        N (int): The dimension.
        s (float): The fractional order.

    Returns:
        np.ndarray: U(x).
    """
    return (1 + _radius_squared(x, N)) ** ((2 * s - N) / 2)


def bubble_Ueps(x: Union[float, np.ndarray], eps: float, N: int, s: float) -> np.ndarray:
    """The dilated bubble U_eps(x) = (eps + |x|^2)^{(2s-N)/2} = eps^{(2s-N)/2} U(x / sqrt(eps)).

    Args:
        x (Union[float, np.ndarray]): The points.
        eps (float): The concentration parameter, positive.
        N (int): The dimension.
        s (float): The fractional order.

    Returns:
        np.ndarray: U_eps(x).
    """
    if eps <= 0:
        raise ConfigurationError(f"The concentration parameter eps={eps} must be positive.")

    return (eps + _radius_squared(x, N)) ** ((2 * s - N) / 2)


def critical_bubble(
    x: Union[float, np.ndarray], t: float, x0: float = 0.0, C: float = 1.0, N: int = 1, s: float = 0.5
) -> np.ndarray:
    """The critical family C (t / (t^2 + |x - x0|^2))^{(N-2s)/2}.

    Args:
        x (Union[float, np.ndarray]): The points.
        t (float): The scale, positive.
        x0 (float, optional): The center. Defaults to 0.
        C (float, optional): The amplitude constant. Defaults to 1.
        N (int, optional): The dimension. Defaults to 1.
        s (float, optional): The fractional order. Defaults to 0.5.

    Returns:
        np.ndarray: The values.
    """
    if t <= 0:
        raise ConfigurationError(f"The bubble scale t={t} must be positive.")

    shifted = np.asarray(x, dtype=float) - x0
    return C * (t / (t**2 + _radius_squared(shifted, N))) ** ((N - 2 * s) / 2)


def smoothstep(t: np.ndarray) -> np.ndarray:
    """The quintic smoothstep 6 t^5 - 15 t^4 + 10 t^3, clipped to [0, 1].

    Args:
        t (np.ndarray): The argument.

    Returns:
        np.ndarray: The values, with vanishing first and second derivatives at 0 and 1.
    """
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10 - 15 * t + 6 * t**2)


def radial_cutoff(x: Union[float, np.ndarray], center: float, radius: float) -> np.ndarray:
    """A C^2 cutoff: 1 within radius / 2 of the center, 0 beyond the radius, a quintic smoothstep in between.

    Args:
        x (Union[float, np.ndarray]): The points.
        center (float): The center.
        radius (float): The support radius, positive.

    Returns:
        np.ndarray: The cutoff values.
    """
    distance = np.abs(np.asarray(x, dtype=float) - center)
    return smoothstep(2 * (radius - distance) / radius)


@dataclass(frozen=True)
class BubbleSpec:
    """A bubble U_eps centered at x0, truncated by a radial cutoff of support radius R."""

    eps: float
    center: float
    s: float
    N: int

    # The support radius R of the cutoff; the cutoff equals 1 up to R / 2.
    radius: float

    @classmethod
    def standard(cls, eps: float, s: float, N: int = 1) -> "BubbleSpec":
        """The boundary-concentrated construction: R = 1/|ln eps|, x0 = 1 - R.

        Args:
            eps (float): The concentration parameter, in (0, 1/e).
            s (float): The fractional order.
            N (int, optional): The dimension. Defaults to 1.

        Returns:
            BubbleSpec: The bubble parameters.
        """
        if not 0 < eps < np.exp(-1):
            raise ConfigurationError(f"The concentration parameter eps={eps} must lie in (0, 1/e).")

        radius = 1 / abs(np.log(eps))
        return cls(eps=eps, center=1 - radius, s=s, N=N, radius=radius)

    @property
    def plateau(self) -> float:
        """The radius, up to which the cutoff equals 1."""
        return self.radius / 2

    @property
    def gradient_bound(self) -> float:
        """The maximal slope of the cutoff, 15/4 / R."""
        return 15 / (4 * self.radius)

    @property
    def peak(self) -> float:
        """The peak value eps^{(2s-N)/2}."""
        return self.eps ** ((2 * self.s - self.N) / 2)

    def cutoff(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """The cutoff phi: 1 on the plateau, 0 outside the support, quintic in between.

        Args:
            x (Union[float, np.ndarray]): The points.

        Returns:
            np.ndarray: phi(x).
        """
        return radial_cutoff(x, self.center, self.radius)

    def samples(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """The truncated bubble phi(x) U_eps(x - x0).

        Args:
            x (Union[float, np.ndarray]): The points.

        Returns:
            np.ndarray: The values.
        """
        x = np.asarray(x, dtype=float)
        return self.cutoff(x) * bubble_Ueps(x - self.center, self.eps, self.N, self.s)

    def check_domain(self) -> None:
        """Check that the cutoff support lies in the closed ball.

        Raises:
            CutoffEscapesDomain: If the support crosses the boundary.
        """
        tolerance = 1e-12

        if self.center + self.radius > 1 + tolerance or self.center - self.radius < -1 - tolerance:
            raise CutoffEscapesDomain(
                f"Cutoff support [{self.center - self.radius:.6g}, {self.center + self.radius:.6g}] leaves the ball."
            )


def truncated_bubble(spec: BubbleSpec, basis: BasisSpec) -> SpectralField:
    """Project the truncated bubble onto the eigenbasis.

    Args:
        spec (BubbleSpec): The bubble.
        basis (BasisSpec): The basis.

    Raises:
        CutoffEscapesDomain: If the cutoff support crosses the boundary.

    Returns:
        SpectralField: The projected field.
    """
    spec.check_domain()

    field = to_coefficients(spec.samples(basis.nodes), basis)
    logger.debug("Truncated bubble at eps=%.4g: tail energy share %.3g.", spec.eps, tail_energy(field, spec.s))

    return field


@dataclass(frozen=True)
class BubbleFamily:
    """Critical quotients of the truncated bubbles along a halving sequence of eps."""

    eps: List[float]
    quotients: List[float]

    # The leading error gauges (eps ln^2 eps)^{(N-2s)/2}.
    gauges: List[float]

    # Shares of the H^s energy in the top modes.
    tails: List[float]

    @property
    def limit(self) -> float:
        """The extrapolated limit of the quotients."""
        return linear_gauge_limit(self.gauges, self.quotients)


def bubble_family(config: ProblemConfig, eps0: float = 1e-2, halvings: int = 4) -> BubbleFamily:
    """Evaluate the critical quotient (alpha = 0) of the truncated bubbles at eps0, eps0/2, ..., eps0/2^halvings.

    Args:
        config (ProblemConfig): The problem configuration; its weight exponent is not used.
        eps0 (float, optional): The largest eps. Defaults to 1e-2.
        halvings (int, optional): The number of halvings. Defaults to 4.

    Returns:
        BubbleFamily: The quotient sequence.
    """
    if halvings < 1:
        raise ConfigurationError("At least one halving of eps is required.")

    basis = make_basis(config)
    family = BubbleFamily([], [], [], [])

    for index in range(halvings + 1):
        eps = eps0 / 2**index
        spec = BubbleSpec.standard(eps, config.s, config.N)
        field = truncated_bubble(spec, basis)

        family.eps.append(eps)
        family.quotients.append(quotient_scalar(field, config.crit_exp, 0.0, config.s))
        family.gauges.append((eps * np.log(eps) ** 2) ** ((config.N - 2 * config.s) / 2))
        family.tails.append(tail_energy(field, config.s))

    return family


def sobolev_constant_estimate(config: ProblemConfig, eps0: float = 1e-2, halvings: int = 4) -> float:
    """Estimate the best Sobolev constant by extrapolating the truncated-bubble quotients to eps -> 0.

    Args:
        config (ProblemConfig): The problem configuration; the quotient is always taken with alpha = 0.
        eps0 (float, optional): The largest eps. Defaults to 1e-2.
        halvings (int, optional): The number of halvings. Defaults to 4.

    Raises:
        ExtrapolationUnstable: If the quotient sequence is not decreasing.

    Returns:
        float: The estimate S-hat.
    """
    family = bubble_family(config, eps0, halvings)
    check_monotone(family.quotients, decreasing=True, tolerance=MONOTONE_TOLERANCE)

    estimate = family.limit
    logger.info("Extrapolated Sobolev constant %.10g from quotients %s.", estimate, family.quotients)

    return estimate


def sharp_sobolev_constant(N: int, s: float) -> float:
    """The best constant of ||u||^2_{H^s} >= S ||u||^2_{L^{2*_s}} on R^N, attained by the bubbles.

    Args:
        N (int): The dimension.
        s (float): The fractional order.

    Returns:
        float: 2^{2s} pi^s Gamma((N+2s)/2) / Gamma((N-2s)/2) (Gamma(N/2) / Gamma(N))^{2s/N}.
    """
    if N <= 2 * s:
        raise ConfigurationError(f"The dimension N={N} must exceed 2s={2 * s}.")

    return float(
        2 ** (2 * s)
        * np.pi**s
        * gamma((N + 2 * s) / 2)
        / gamma((N - 2 * s) / 2)
        * (gamma(N / 2) / gamma(N)) ** (2 * s / N)
    )


def kelvin(profile: Union[Profile, SpectralField], pole: float, N: int, s: float) -> Profile:
    """The Kelvin transform |x - p|^{2s-N} f((x - p) / |x - p|^2 + p).

    Args:
        profile (Union[Profile, SpectralField]): A closed-form profile, or a field evaluated spectrally.
        pole (float): The pole p.
        N (int): The dimension.
        s (float): The fractional order.

    Returns:
        Profile: The transformed profile. It raises PoleSingularity when evaluated at the pole.
    """
    evaluate = profile.evaluate if isinstance(profile, SpectralField) else profile

    def transformed(x: Union[float, np.ndarray]) -> np.ndarray:
        shifted = np.asarray(x, dtype=float) - pole
        radius_squared = _radius_squared(shifted, N)

        if np.any(radius_squared == 0):
            raise PoleSingularity(f"The Kelvin transform is singular at its pole {pole}.")

        inverted = shifted / (radius_squared if N == 1 else radius_squared[..., None]) + pole
        return radius_squared ** ((2 * s - N) / 2) * evaluate(inverted)

    return transformed


@dataclass(frozen=True)
class ProfileFit:
    """A least-squares fit of (a U((xi - c)/t), b U((xi - c)/t)) to a pair of rescaled traces."""

    a: float
    b: float
    scale: float
    center: float

    # Relative L^2 residual of the fit over the window.
    residual: float

    @property
    def amplitude_ratio(self) -> float:
        """The ratio a / b."""
        return self.a / self.b


def fit_profile(xi: np.ndarray, u_samples: np.ndarray, v_samples: np.ndarray, config: ProblemConfig) -> ProfileFit:
    """Fit bubbles with shared scale and center to the samples of a rescaled solution pair.

    Args:
        xi (np.ndarray): The window coordinates.
        u_samples (np.ndarray): The samples of the first component.
        v_samples (np.ndarray): The samples of the second component.
        config (ProblemConfig): Provides N and s.

    Raises:
        FitDegenerate: If fewer than 8 samples exceed half of the peak, or the fit fails.

    Returns:
        ProfileFit: The fitted parameters.
    """
    xi = np.asarray(xi, dtype=float)
    u_samples = np.asarray(u_samples, dtype=float)
    v_samples = np.asarray(v_samples, dtype=float)

    peak_index = int(np.argmax(u_samples))
    above = u_samples > u_samples[peak_index] / 2

    if np.count_nonzero(above) < MIN_FIT_POINTS:
        raise FitDegenerate(f"Only {np.count_nonzero(above)} window samples exceed half of the peak.")

    N, s = config.N, config.s

    # U drops to one half at this radius.
    half_radius = np.sqrt(2 ** (2 / (N - 2 * s)) - 1)
    half_width = (xi[above].max() - xi[above].min()) / 2

    def residuals(parameters: np.ndarray) -> np.ndarray:
        a, b, log_scale, center = parameters
        shape = bubble_U((xi - center) / np.exp(log_scale), N, s)
        return np.concatenate([a * shape - u_samples, b * shape - v_samples])

    initial = np.array([u_samples[peak_index], np.max(v_samples), np.log(half_width / half_radius), xi[peak_index]])
    result = least_squares(residuals, initial, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)

    a, b, log_scale, center = result.x

    if result.status <= 0 or a <= 0 or b <= 0:
        logger.warning("Profile fit failed: %s", result.message)
        raise FitDegenerate(f"Profile fit failed ({result.message}).")

    reference = np.sqrt(np.sum(u_samples**2) + np.sum(v_samples**2))
    residual = float(np.linalg.norm(result.fun) / reference)

    return ProfileFit(a=float(a), b=float(b), scale=float(np.exp(log_scale)), center=float(center), residual=residual)
