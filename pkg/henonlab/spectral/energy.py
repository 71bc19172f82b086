"""Weighted Henon functionals: mixed nonlinear integrals, Rayleigh quotients, functional gradients, and C_{p,q}.

Fractional powers are always taken of absolute values, |u|^p, so that every functional is total on signed fields.
Gradients are the exact derivatives of these discretized functionals: the nonlinear terms are sampled on the
physical grid and projected back by the same quadrature that defines the integrals.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from henonlab.helper.errors import ConfigurationError, NumericalFailure
from henonlab.spectral.core import SpectralField, frac_laplacian, hs_norm, to_coefficients, weighted_integral

# A logger for this module
logger = logging.getLogger(__name__)

# Denominators below this value are treated as zero.
DENOMINATOR_TOLERANCE = 1e-300


class ZeroDenominator(NumericalFailure):
    """Custom exception for Rayleigh quotients with a vanishing constraint integral."""


class NonIntegrablePower(NumericalFailure):
    """Custom exception for negative powers of possibly vanishing samples."""


def cpq(p: float, q: float) -> float:
    """The scalar-to-system constant C_{p,q} = (p/q)^{q/(p+q)} + (p/q)^{-p/(p+q)}.

    It is symmetric in (p, q), and maximal at p = q, where it equals 2.

    Args:
        p (float): The first exponent, positive.
        q (float): The second exponent, positive.

    Returns:
        float: C_{p,q}.
    """
    if p <= 0 or q <= 0:
        raise ConfigurationError(f"Exponents must be positive, got p={p}, q={q}.")

    ratio = p / q
    total = p + q
    return ratio ** (q / total) + ratio ** (-p / total)


@dataclass(frozen=True)
class ExponentConfig:
    """The exponents (p, q) of the coupled nonlinearity |u|^p |v|^q."""

    p: float
    q: float

    # The critical exponent 2*_s of the problem, for classifying p + q.
    crit_exp: float

    def __post_init__(self):
        """Validate the exponents."""
        if self.p <= 1 or self.q <= 1:
            raise ConfigurationError(f"Both exponents must exceed 1, got p={self.p}, q={self.q}.")

    @property
    def total(self) -> float:
        """The sum p + q."""
        return self.p + self.q

    @property
    def is_critical(self) -> bool:
        """Whether p + q equals the critical exponent (up to rounding)."""
        return abs(self.total - self.crit_exp) <= 1e-12 * self.crit_exp

    @property
    def is_subcritical(self) -> bool:
        """Whether p + q lies strictly below the critical exponent."""
        return self.total < self.crit_exp and not self.is_critical

    @property
    def criticality(self) -> str:
        """A tag: 'subcritical', 'critical' or 'supercritical'."""
        if self.is_critical:
            return "critical"

        return "subcritical" if self.total < self.crit_exp else "supercritical"

    @property
    def cpq(self) -> float:
        """The constant C_{p,q}."""
        return cpq(self.p, self.q)


def _abs_power(samples: np.ndarray, exponent: float) -> np.ndarray:
    """|f|^exponent, with 0^0 = 1.

    Args:
        samples (np.ndarray): The samples f.
        exponent (float): The power, nonnegative.

    Raises:
        NonIntegrablePower: If the exponent is negative.

    Returns:
        np.ndarray: The powers.
    """
    if exponent < 0:
        raise NonIntegrablePower(f"The power {exponent} of a possibly vanishing field is not integrable.")

    if exponent == 0:
        return np.ones_like(samples)

    return np.abs(samples) ** exponent


def _signed_power(samples: np.ndarray, exponent: float) -> np.ndarray:
    """sign(f) |f|^exponent, the derivative companion of |f|^(exponent + 1).

    Args:
        samples (np.ndarray): The samples f.
        exponent (float): The power, nonnegative.

    Returns:
        np.ndarray: The signed powers.
    """
    return np.sign(samples) * _abs_power(samples, exponent)


def mixed_term(u: SpectralField, v: SpectralField, exp: ExponentConfig, alpha: float) -> float:
    """The constraint integral int_B |x|^alpha |u|^p |v|^q dx.

    Args:
        u (SpectralField): The first field.
        v (SpectralField): The second field, in the same basis.
        exp (ExponentConfig): The exponents.
        alpha (float): The weight exponent.

    Returns:
        float: The integral.
    """
    integrand = _abs_power(u.samples, exp.p) * _abs_power(v.samples, exp.q)
    return weighted_integral(integrand, alpha, u.basis)


def power_term(w: SpectralField, r: float, alpha: float) -> float:
    """The scalar constraint integral int_B |x|^alpha |w|^r dx.

    Args:
        w (SpectralField): The field.
        r (float): The exponent.
        alpha (float): The weight exponent.

    Returns:
        float: The integral.
    """
    return weighted_integral(_abs_power(w.samples, r), alpha, w.basis)


def _check_denominator(value: float) -> None:
    """Reject vanishing constraint integrals.

    Args:
        value (float): The constraint integral.

    Raises:
        ZeroDenominator: If the integral is not positive.
    """
    if value <= DENOMINATOR_TOLERANCE:
        raise ZeroDenominator(f"The constraint integral {value:.3g} vanishes; the quotient is undefined.")


def quotient_system(u: SpectralField, v: SpectralField, exp: ExponentConfig, alpha: float, s: float) -> float:
    """The system Rayleigh quotient (||u||^2 + ||v||^2) / (int |x|^alpha |u|^p |v|^q)^(2/(p+q)).

    The cylinder energy is replaced by the H^s norms, which it equals by the extension isometry.

    Args:
        u (SpectralField): The first field.
        v (SpectralField): The second field.
        exp (ExponentConfig): The exponents.
        alpha (float): The weight exponent.
        s (float): The fractional order.

    Raises:
        ZeroDenominator: If the mixed integral vanishes.

    Returns:
        float: The quotient.
    """
    denominator = mixed_term(u, v, exp, alpha)
    _check_denominator(denominator)
    return (hs_norm(u, s) ** 2 + hs_norm(v, s) ** 2) / denominator ** (2 / exp.total)


def quotient_scalar(w: SpectralField, r: float, alpha: float, s: float) -> float:
    """The scalar Rayleigh quotient ||w||^2 / (int |x|^alpha |w|^r)^(2/r).

    Args:
        w (SpectralField): The field.
        r (float): The exponent.
        alpha (float): The weight exponent.
        s (float): The fractional order.

    Raises:
        ZeroDenominator: If the power integral vanishes.

    Returns:
        float: The quotient.
    """
    denominator = power_term(w, r, alpha)
    _check_denominator(denominator)
    return hs_norm(w, s) ** 2 / denominator ** (2 / r)


def mixed_gradient(
    u: SpectralField, v: SpectralField, exp: ExponentConfig, alpha: float
) -> Tuple[SpectralField, SpectralField]:
    """Coefficients of the derivative of the mixed integral: (p |x|^alpha |u|^{p-1}|v|^q, q |x|^alpha |u|^p|v|^{q-1}).

    Args:
        u (SpectralField): The first field.
        v (SpectralField): The second field.
        exp (ExponentConfig): The exponents.
        alpha (float): The weight exponent.

    Returns:
        Tuple[SpectralField, SpectralField]: The projected partial derivatives.
    """
    basis = u.basis
    weight = basis.weight_power(alpha)

    u_part = exp.p * weight * _signed_power(u.samples, exp.p - 1) * _abs_power(v.samples, exp.q)
    v_part = exp.q * weight * _abs_power(u.samples, exp.p) * _signed_power(v.samples, exp.q - 1)

    return to_coefficients(u_part, basis), to_coefficients(v_part, basis)


def power_gradient(w: SpectralField, r: float, alpha: float) -> SpectralField:
    """Coefficients of the derivative of the scalar power integral: r |x|^alpha |w|^{r-1} sign(w).

    Args:
        w (SpectralField): The field.
        r (float): The exponent.
        alpha (float): The weight exponent.

    Raises:
        NonIntegrablePower: If r < 1.

    Returns:
        SpectralField: The projected derivative.
    """
    basis = w.basis
    return to_coefficients(r * basis.weight_power(alpha) * _signed_power(w.samples, r - 1), basis)


def action(u: SpectralField, v: SpectralField, exp: ExponentConfig, alpha: float, s: float) -> float:
    """The energy functional I(u, v) = (||u||^2 + ||v||^2) / 2 - 2/(p+q) int |x|^alpha |u|^p |v|^q.

    Its critical points are the weak solutions of the Henon system.

    Args:
        u (SpectralField): The first field.
        v (SpectralField): The second field.
        exp (ExponentConfig): The exponents.
        alpha (float): The weight exponent.
        s (float): The fractional order.

    Returns:
        float: I(u, v).
    """
    return (hs_norm(u, s) ** 2 + hs_norm(v, s) ** 2) / 2 - 2 / exp.total * mixed_term(u, v, exp, alpha)


def gradient_pair(
    u: SpectralField, v: SpectralField, exp: ExponentConfig, alpha: float, s: float
) -> Tuple[SpectralField, SpectralField]:
    """The gradient of the action in coefficient space, i.e. the weak-form residual of the Henon system.

    Components are (-Delta)^s u - 2p/(p+q) |x|^alpha u^{p-1} v^q and (-Delta)^s v - 2q/(p+q) |x|^alpha u^p v^{q-1}.

    Args:
        u (SpectralField): The first field.
        v (SpectralField): The second field.
        exp (ExponentConfig): The exponents.
        alpha (float): The weight exponent.
        s (float): The fractional order.

    Raises:
        NonIntegrablePower: If p < 1 or q < 1.

    Returns:
        Tuple[SpectralField, SpectralField]: The two gradient components.
    """
    du, dv = mixed_gradient(u, v, exp, alpha)
    scale = 2 / exp.total

    return frac_laplacian(u, s) - scale * du, frac_laplacian(v, s) - scale * dv


def scalar_gradient(w: SpectralField, r: float, alpha: float, s: float) -> SpectralField:
    """The gradient of the scalar action ||w||^2 / 2 - 2/r int |x|^alpha |w|^r.

    Args:
        w (SpectralField): The field.
        r (float): The exponent.
        alpha (float): The weight exponent.
        s (float): The fractional order.

    Returns:
        SpectralField: (-Delta)^s w - 2 |x|^alpha |w|^{r-2} w.
    """
    return frac_laplacian(w, s) - (2 / r) * power_gradient(w, r, alpha)
