"""The s-harmonic extension of fields on B to the half-cylinder B x (0, inf), realized mode by mode.

Separation of variables in -div(y^{1-2s} grad w) = 0 with w = 0 on the lateral boundary gives

    w(x, y) = sum_k u_k phi_k(x) theta(sqrt(lambda_k) y),    theta(z) = 2^{1-s} / Gamma(s) z^s K_s(z),

where theta is the decaying solution of theta'' + (1-2s)/z theta' - theta = 0 with theta(0) = 1. The modified
Bessel functions are computed from the integral representation K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt.

The profile satisfies lim z^{1-2s} theta'(z) = -k_s and int z^{1-2s} (theta^2 + theta'^2) dz = k_s, with
k_s = 2^{1-2s} Gamma(1-s) / Gamma(s). Both the Dirichlet-to-Neumann map and the cylinder energy therefore carry the
prefactor 1/k_s, which coincides with k_s at s = 1/2.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.special import gamma, roots_legendre

from henonlab.helper.errors import ConfigurationError, NumericalFailure
from henonlab.helper.extrapolation import ExtrapolationUnstable, richardson
from henonlab.spectral.core import SpectralField, frac_laplacian

# A logger for this module
logger = logging.getLogger(__name__)

# Integrands below this bound are truncated.
TRUNCATION_BOUND = 1e-18

# Range and size of the tabulated profile.
TABLE_Z_MIN = 1e-6
TABLE_Z_MAX = 40.0
TABLE_SIZE = 481

# Composite Gauss-Legendre rule for the Bessel integral: panels x nodes per panel on [0, T].
BESSEL_PANELS = 64
BESSEL_NODES = 16

# Default Neumann sampling heights, in units of 1 / sqrt(lambda_k).
DEFAULT_Z_SEQUENCE = (1e-2, 5e-3, 2.5e-3)

# Lower end of the normalization integral; the part below is added in closed form.
NORMALIZATION_Z_MIN = 1e-8

# Composite Gauss-Legendre rule in log y for the cylinder energy; heights start at ENERGY_Z_MIN / sqrt(lambda_M).
ENERGY_Z_MIN = 1e-6
ENERGY_PANELS = 32
ENERGY_NODES = 12


class QuadratureFailure(NumericalFailure):
    """Custom exception for quadratures that cannot meet their accuracy bound."""


def ks_constant(s: float) -> float:
    """The constant k_s = 2^{1-2s} Gamma(1-s) / Gamma(s).

    Args:
        s (float): The fractional order in (0, 1).

    Returns:
        float: k_s.
    """
    if not 0 < s < 1:
        raise ConfigurationError(f"The fractional order s={s} must lie in (0, 1).")

    return float(2 ** (1 - 2 * s) * gamma(1 - s) / gamma(s))


def _composite_rule(panels: int, nodes: int) -> tuple:
    """A composite Gauss-Legendre rule on [0, 1].

    Args:
        panels (int): Number of equal panels.
        nodes (int): Nodes per panel.

    Returns:
        tuple: The nodes and weights.
    """
    reference_nodes, reference_weights = roots_legendre(nodes)
    offsets = np.arange(panels) / panels
    rule_nodes = (offsets[:, None] + (reference_nodes[None, :] + 1) / (2 * panels)).ravel()
    rule_weights = np.tile(reference_weights / (2 * panels), panels)
    return rule_nodes, rule_weights


_BESSEL_RULE = _composite_rule(BESSEL_PANELS, BESSEL_NODES)


def _truncation_point(order: float, z: np.ndarray) -> np.ndarray:
    """Where exp(-z (cosh t - 1)) cosh(order t) falls below the truncation bound.

    Args:
        order (float): The Bessel order.
        z (np.ndarray): The arguments, positive.

    Returns:
        np.ndarray: The truncation points T(z).
    """
    log_bound = -np.log(TRUNCATION_BOUND)
    cutoff = np.arccosh(1 + log_bound / z)

    for _ in range(6):
        cutoff = np.arccosh(1 + (log_bound + abs(order) * cutoff) / z)

    return cutoff


def scaled_bessel_k(order: float, z: Union[float, np.ndarray]) -> np.ndarray:
    """The scaled modified Bessel function exp(z) K_order(z), by truncated quadrature of its integral representation.

    Args:
        order (float): The order nu.
        z (Union[float, np.ndarray]): The arguments, positive.

    Raises:
        QuadratureFailure: If the integrand at the truncation point exceeds the bound.

    Returns:
        np.ndarray: exp(z) K_nu(z), with the shape of z.
    """
    z = np.asarray(z, dtype=float)
    flat = z.ravel()

    if np.any(flat <= 0):
        raise ValueError("The Bessel integral representation requires positive arguments.")

    cutoff = _truncation_point(order, flat)
    tail = np.exp(-flat * (np.cosh(cutoff) - 1)) * np.cosh(order * cutoff)

    if np.any(tail > 2 * TRUNCATION_BOUND):
        raise QuadratureFailure(f"Bessel integrand tail bound unmet: max {tail.max():.3g}.")

    rule_nodes, rule_weights = _BESSEL_RULE
    result = np.empty_like(flat)

    # Chunks keep the node matrices small.
    for start in range(0, len(flat), 2048):
        chunk = slice(start, start + 2048)
        t = cutoff[chunk, None] * rule_nodes[None, :]
        integrand = np.exp(-flat[chunk, None] * (np.cosh(t) - 1)) * np.cosh(order * t)
        result[chunk] = cutoff[chunk] * (integrand @ rule_weights)

    return result.reshape(z.shape)


def theta_exact(s: float, z: Union[float, np.ndarray]) -> np.ndarray:
    """The modal profile theta(z) = 2^{1-s} / Gamma(s) z^s K_s(z), with theta(0) = 1.

    Args:
        s (float): The fractional order.
        z (Union[float, np.ndarray]): The arguments, nonnegative.

    Returns:
        np.ndarray: theta(z).
    """
    z = np.asarray(z, dtype=float)
    result = np.ones_like(z)
    positive = z > 0

    if np.any(positive):
        zp = z[positive]
        result[positive] = 2 ** (1 - s) / gamma(s) * zp**s * np.exp(-zp) * scaled_bessel_k(s, zp)

    return result


def theta_derivative_exact(s: float, z: Union[float, np.ndarray]) -> np.ndarray:
    """The derivative theta'(z) = -2^{1-s} / Gamma(s) z^s K_{1-s}(z), for positive z.

    Args:
        s (float): The fractional order.
        z (Union[float, np.ndarray]): The arguments, positive.

    Returns:
        np.ndarray: theta'(z).
    """
    z = np.asarray(z, dtype=float)
    return -(2 ** (1 - s)) / gamma(s) * z**s * np.exp(-z) * scaled_bessel_k(1 - s, z)


def _normalization_integral(s: float) -> float:
    """int_0^inf z^{1-2s} (theta^2 + theta'^2) dz, which equals k_s.

    Log-spaced Gauss panels cover [1e-8, 1], linear panels cover [1, 60]; the part below 1e-8 is added from the
    leading small-z behavior theta ~ 1, theta' ~ -k_s z^{2s-1}.

    Args:
        s (float): The fractional order.

    Returns:
        float: The integral.
    """
    log_nodes, log_weights = _composite_rule(24, 16)
    log_span = -np.log(NORMALIZATION_Z_MIN)
    small_z = np.exp(-log_span + log_span * log_nodes)
    small_weights = log_span * log_weights * small_z

    linear_nodes, linear_weights = _composite_rule(40, 16)
    large_z = 1 + 59 * linear_nodes
    large_weights = 59 * linear_weights

    z = np.concatenate([small_z, large_z])
    weights = np.concatenate([small_weights, large_weights])
    integrand = z ** (1 - 2 * s) * (theta_exact(s, z) ** 2 + theta_derivative_exact(s, z) ** 2)

    ks = ks_constant(s)
    z_min = NORMALIZATION_Z_MIN
    below = ks**2 * z_min ** (2 * s) / (2 * s) + z_min ** (2 - 2 * s) / (2 - 2 * s)

    return float(np.dot(weights, integrand)) + below


@dataclass(frozen=True, eq=False)
class ExtensionProfile:
    """The universal modal extension profile theta_s, tabulated on a geometric grid, and the constant k_s."""

    s: float
    ks: float

    # The measured normalization int z^{1-2s}(theta^2 + theta'^2) dz / k_s, which should be 1.
    normalization: float

    z_table: np.ndarray = field(repr=False)
    theta_table: np.ndarray = field(repr=False)
    spline: CubicSpline = field(repr=False)

    @property
    def dtn_constant(self) -> float:
        """The prefactor 1/k_s of the Dirichlet-to-Neumann map and the cylinder energy."""
        return 1 / self.ks

    @property
    def small_z_coefficient(self) -> float:
        """The coefficient b in theta(z) = 1 - b z^{2s} + O(z^2)."""
        return float(2 ** (-2 * self.s) * gamma(1 - self.s) / gamma(1 + self.s))

    def theta(self, z: Union[float, np.ndarray]) -> np.ndarray:
        """Evaluate theta, interpolating log(theta) in log(z) inside the table range.

        Below the table the small-z expansion is used, above it the integral representation.

        Args:
            z (Union[float, np.ndarray]): The arguments, nonnegative.

        Returns:
            np.ndarray: theta(z).
        """
        z = np.asarray(z, dtype=float)
        result = np.empty_like(z)

        small = z < TABLE_Z_MIN
        large = z > TABLE_Z_MAX
        inside = ~(small | large)

        result[small] = 1 - self.small_z_coefficient * z[small] ** (2 * self.s)
        result[inside] = np.exp(self.spline(np.log(z[inside])))

        if np.any(large):
            result[large] = theta_exact(self.s, z[large])

        return result

    def derivative(self, z: Union[float, np.ndarray]) -> np.ndarray:
        """Evaluate theta' from the integral representation.

        Args:
            z (Union[float, np.ndarray]): The arguments, positive.

        Returns:
            np.ndarray: theta'(z).
        """
        return theta_derivative_exact(self.s, z)

    def value_at_zero(self, z: float = 1e-3) -> float:
        """Extrapolate theta(0+) from theta(z) and theta(z/2), eliminating the z^{2s} term.

        Args:
            z (float, optional): The larger sampling point. Defaults to 1e-3.

        Returns:
            float: The extrapolated value, which should be 1.
        """
        values = theta_exact(self.s, np.array([z, z / 2]))
        return richardson([z, z / 2], values, [2 * self.s])

    def ode_residual(self, z: Union[float, np.ndarray], relative_step: float = 1e-4) -> np.ndarray:
        """Relative residual of theta'' + (1-2s)/z theta' - theta = 0, with theta'' by central differences of theta'.

        Args:
            z (Union[float, np.ndarray]): Interior points, positive.
            relative_step (float, optional): The difference step, relative to z. Defaults to 1e-4.

        Returns:
            np.ndarray: |residual| / (|theta''| + |(1-2s)/z theta'| + |theta|).
        """
        z = np.asarray(z, dtype=float)
        step = relative_step * z
        second = (self.derivative(z + step) - self.derivative(z - step)) / (2 * step)
        first = (1 - 2 * self.s) / z * self.derivative(z)
        value = theta_exact(self.s, z)

        return np.abs(second + first - value) / (np.abs(second) + np.abs(first) + np.abs(value))


@lru_cache(maxsize=32)
def theta_profile(s: float) -> ExtensionProfile:
    """Build the extension profile for the order s.

    Args:
        s (float): The fractional order in (0, 1).

    Raises:
        QuadratureFailure: If the Bessel quadrature cannot meet its truncation bound.

    Returns:
        ExtensionProfile: The tabulated profile.
    """
    ks = ks_constant(s)
    z_table = np.geomspace(TABLE_Z_MIN, TABLE_Z_MAX, TABLE_SIZE)
    theta_table = theta_exact(s, z_table)
    spline = CubicSpline(np.log(z_table), np.log(theta_table))

    normalization = _normalization_integral(s) / ks

    for array in (z_table, theta_table):
        array.setflags(write=False)

    logger.info("Built the extension profile for s=%.4g (k_s=%.10g, normalization %.12g).", s, ks, normalization)

    return ExtensionProfile(s, ks, normalization, z_table, theta_table, spline)


class CylinderExtension:
    """The extension w(x, y) = sum_k u_k phi_k(x) theta(sqrt(lambda_k) y) of a field, as a callable."""

    def __init__(self, field: SpectralField, profile: ExtensionProfile):
        """Initialize the evaluator.

        Args:
            field (SpectralField): The trace u = w(., 0).
            profile (ExtensionProfile): The modal profile.
        """
        self.field = field
        self.profile = profile
        self._roots = np.sqrt(field.basis.eigenvalues)

    def __call__(self, x: Union[float, np.ndarray], y: Union[float, np.ndarray]) -> np.ndarray:
        """Evaluate w at points (x, y) of the half-cylinder.

        Args:
            x (Union[float, np.ndarray]): The horizontal coordinates in [-1, 1].
            y (Union[float, np.ndarray]): The heights, nonnegative.

        Returns:
            np.ndarray: The values, with the broadcast shape of x and y.
        """
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        basis = self.field.basis

        phases = np.multiply.outer(x.ravel() + 1, basis.wavenumbers) * (np.pi / 2)
        profiles = self.profile.theta(np.multiply.outer(y.ravel(), self._roots))

        return ((np.sin(phases) * profiles) @ self.field.coeffs).reshape(x.shape)


def extend(field: SpectralField, profile: ExtensionProfile) -> CylinderExtension:
    """The s-harmonic extension of a field.

    Args:
        field (SpectralField): The trace.
        profile (ExtensionProfile): The modal profile for the order s.

    Returns:
        CylinderExtension: The evaluator w(x, y).
    """
    return CylinderExtension(field, profile)


def cylinder_energy(field: SpectralField, profile: ExtensionProfile) -> float:
    """The weighted Dirichlet energy (1/k_s) int_0^inf int_B y^{1-2s} |grad w|^2 dx dy of the extension.

    The gradient of w is sampled on the tensor grid of the quadrature nodes in x and a composite Gauss rule in log y.
    Below the lowest height, w_x is replaced by the trace derivative u' and w_y by -k_s y^{2s-1} (-Delta)^s u.

    Args:
        field (SpectralField): The trace.
        profile (ExtensionProfile): The modal profile.

    Returns:
        float: The energy; equal to the squared H^s norm of the trace.
    """
    basis = field.basis
    s = profile.s
    roots = np.sqrt(basis.eigenvalues)

    y_min = ENERGY_Z_MIN / roots[-1]
    span = np.log(TABLE_Z_MAX / roots[0] / y_min)
    rule_nodes, rule_weights = _composite_rule(ENERGY_PANELS, ENERGY_NODES)
    y = y_min * np.exp(span * rule_nodes)

    # dy = y dt in t = log y
    y_weights = span * rule_weights * y ** (2 - 2 * s)

    z = np.multiply.outer(y, roots)
    values = field.coeffs * profile.theta(z)
    slopes = field.coeffs * roots * profile.derivative(z)

    phases = np.multiply.outer(basis.nodes + 1, basis.wavenumbers) * (np.pi / 2)
    derivatives = roots * np.cos(phases)

    w_x = derivatives @ values.T
    w_y = np.sin(phases) @ slopes.T
    bulk = float(y_weights @ (basis.weights @ (w_x**2 + w_y**2)))

    trace_slope = derivatives @ field.coeffs
    operator = frac_laplacian(field, s).samples
    below = float(basis.weights @ trace_slope**2) * y_min ** (2 - 2 * s) / (2 - 2 * s)
    below += profile.ks**2 * float(basis.weights @ operator**2) * y_min ** (2 * s) / (2 * s)

    return (bulk + below) / profile.ks


def neumann_limit(
    field: SpectralField, profile: ExtensionProfile, z_sequence: Sequence[float] = DEFAULT_Z_SEQUENCE
) -> SpectralField:
    """Recover (-Delta)^s u as the weighted Neumann limit -(1/k_s) lim y^{1-2s} dw/dy.

    Mode k is sampled at heights y_j = z_j / sqrt(lambda_k) and extrapolated by three-point Richardson, eliminating
    the error terms y^{2-2s} and y^2.

    Args:
        field (SpectralField): The trace.
        profile (ExtensionProfile): The modal profile.
        z_sequence (Sequence[float], optional): Three decreasing heights, in units of 1 / sqrt(lambda_k).

    Raises:
        ExtrapolationUnstable: If the samples do not approach the limit monotonically.

    Returns:
        SpectralField: The field with coefficients approximating lambda_k^s u_k.
    """
    z = np.asarray(z_sequence, dtype=float)

    if len(z) != 3 or np.any(np.diff(z) >= 0) or z[-1] <= 0:
        raise ValueError("The Neumann limit needs three positive, decreasing heights.")

    s = profile.s

    # With y = z / sqrt(lambda_k): y^{1-2s} d/dy theta(sqrt(lambda_k) y) = lambda_k^s z^{1-2s} theta'(z).
    samples = -profile.dtn_constant * z ** (1 - 2 * s) * profile.derivative(z)
    limit = richardson(z, samples, [2 - 2 * s, 2])

    deviations = np.abs(samples - limit)

    if np.any(np.diff(deviations) > 0):
        raise ExtrapolationUnstable(f"Neumann samples {samples} do not approach their limit {limit}.")

    logger.debug("Neumann limit factor for s=%.4g: %.15g.", s, limit)

    return SpectralField(field.basis, limit * field.basis.eigenvalues**s * field.coeffs)


@lru_cache(maxsize=32)
def poisson_constant(s: float) -> float:
    """The constant c of the one-dimensional Poisson kernel c y^{2s} / (x^2 + y^2)^{(1+2s)/2}.

    It is fixed numerically by requiring unit kernel mass, so that W(., y) -> U as y -> 0+. With x = y tan(t) the
    mass is int cos(t)^{2s-1} dt over (-pi/2, pi/2), integrated against the algebraic end-point weight.

    Args:
        s (float): The fractional order.

    Raises:
        QuadratureFailure: If the quadrature reports failure.

    Returns:
        float: c.
    """
    half_pi = np.pi / 2

    def smooth_part(t: float) -> float:
        if abs(t) >= half_pi:
            return np.pi ** (1 - 2 * s)

        return (np.cos(t) / ((half_pi - t) * (half_pi + t))) ** (2 * s - 1)

    mass, error, info = quad(
        smooth_part, -half_pi, half_pi, weight="alg", wvar=(2 * s - 1, 2 * s - 1), full_output=True
    )[:3]

    if error > 1e-10 * mass:
        raise QuadratureFailure(f"Poisson kernel mass quadrature failed (error estimate {error:.3g}).")

    return 1 / mass


def poisson_extension_W(x: float, y: float, N: int, s: float) -> float:
    """The extension W(x, y) = c y^{2s} int U(z) / ((x-z)^2 + y^2)^{(N+2s)/2} dz of the bubble U, for N = 1.

    With z = x + y tan(t), the integrand becomes (cos^2 t + (x cos t + y sin t)^2)^{(2s-1)/2}, which is smooth on
    (-pi/2, pi/2) and of size y^{2s-1} in layers of width ~y at the end points.

    Args:
        x (float): The horizontal coordinate.
        y (float): The height, positive.
        N (int): The dimension; only N = 1 is implemented.
        s (float): The fractional order.

    Raises:
        QuadratureFailure: If the adaptive quadrature does not converge.

    Returns:
        float: W(x, y).
    """
    if N != 1:
        raise ConfigurationError(f"The Poisson extension is implemented for N=1 only, got N={N}.")

    if y <= 0:
        raise ValueError("The Poisson extension is evaluated at positive heights only.")

    half_pi = np.pi / 2
    layer = min(0.25, 50 * y)

    def integrand(t: float) -> float:
        cos_t = np.cos(t)
        return (cos_t**2 + (x * cos_t + y * np.sin(t)) ** 2) ** (s - 0.5)

    value, error, info = quad(
        integrand,
        -half_pi,
        half_pi,
        points=(-half_pi + layer, half_pi - layer),
        limit=400,
        epsabs=1e-13,
        epsrel=1e-11,
        full_output=True,
    )[:3]

    if error > 1e-8 * max(abs(value), 1e-300):
        raise QuadratureFailure(f"Poisson extension quadrature failed at ({x}, {y}): error {error:.3g}.")

    return poisson_constant(s) * value
