"""Spectral core: the Dirichlet eigenbasis of the unit ball B = (-1, 1) and the operators built on it.

Functions on B are represented by their coefficients u_k in the L^2-normalized Dirichlet eigenbasis

    phi_k(x) = sin(k pi (x + 1) / 2),    -phi_k'' = lambda_k phi_k,    lambda_k = (k pi / 2)^2,

and the spectral fractional Laplacian acts coefficient-wise by lambda_k^s. Nonlinear expressions are evaluated on
an oversampled physical grid, which is also the quadrature rule of the module: G/2 Gauss-Legendre nodes on each of
[-1, 0] and [0, 1], so that the kink of the Henon weight |x|^alpha at the origin falls onto a panel boundary.
"""
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from scipy.special import roots_legendre

from henonlab.helper.errors import ConfigurationError

# A logger for this module
logger = logging.getLogger(__name__)

# The minimal number of eigenmodes.
MIN_MODES = 8

# The minimal ratio of physical samples to eigenmodes.
MIN_OVERSAMPLING = 4

# The share of top modes that is monitored for spectral tails.
TAIL_SHARE = 0.1


class UnsupportedDimension(ConfigurationError):
    """Custom exception for spatial dimensions without an implemented eigenbasis."""


class DimensionMismatch(ValueError):
    """Custom exception for coefficient or sample arrays that do not fit the basis."""


@dataclass(frozen=True)
class ProblemConfig:
    """Domain and operator parameters of a fractional Henon problem on the unit ball."""

    # The fractional order, in (0, 1).
    s: float

    # The spatial dimension.
    N: int = 1

    # The exponent of the Henon weight |x|^alpha.
    alpha: float = 0.0

    # The number of eigenmodes M.
    modes: int = 64

    # The number of physical samples G. Defaults to 4 M.
    grid: Optional[int] = None

    def __post_init__(self):
        """Validate parameters and derive the sample count."""
        if self.grid is None:
            object.__setattr__(self, "grid", MIN_OVERSAMPLING * self.modes)

        if not 0 < self.s < 1:
            raise ConfigurationError(f"The fractional order s={self.s} must lie in (0, 1).")

        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"The dimension N={self.N} must be a positive integer.")

        if self.N <= 2 * self.s:
            raise ConfigurationError(f"The dimension N={self.N} must exceed 2s={2 * self.s}.")

        if self.alpha < 0:
            raise ConfigurationError(f"The weight exponent alpha={self.alpha} must be nonnegative.")

        if self.modes < MIN_MODES:
            raise ConfigurationError(f"At least {MIN_MODES} modes are required, got {self.modes}.")

        if self.grid < MIN_OVERSAMPLING * self.modes:
            raise ConfigurationError(
                f"The grid ({self.grid} samples) must oversample the {self.modes} modes at least "
                f"{MIN_OVERSAMPLING} times."
            )

    @property
    def crit_exp(self) -> float:
        """The critical Sobolev exponent 2*_s = 2N / (N - 2s)."""
        return 2 * self.N / (self.N - 2 * self.s)

    def with_modes(self, modes: int) -> "ProblemConfig":
        """A copy of this configuration at another truncation, keeping the oversampling ratio.

        Args:
            modes (int): The new number of eigenmodes.

        Returns:
            ProblemConfig: The new configuration.
        """
        ratio = max(MIN_OVERSAMPLING, self.grid // self.modes)
        return replace(self, modes=modes, grid=ratio * modes)

    def with_alpha(self, alpha: float) -> "ProblemConfig":
        """A copy of this configuration with another weight exponent.

        Args:
            alpha (float): The new weight exponent.

        Returns:
            ProblemConfig: The new configuration.
        """
        return replace(self, alpha=alpha)


@dataclass(frozen=True, eq=False)
class BasisSpec:
    """The truncated Dirichlet eigenbasis of (-1, 1), together with its physical grid and quadrature rule."""

    config: ProblemConfig

    # The eigenvalues lambda_k, k = 1..M.
    eigenvalues: np.ndarray

    # The quadrature nodes on (-1, 1), ascending.
    nodes: np.ndarray

    # The quadrature weights.
    weights: np.ndarray

    # The synthesis matrix phi_k(x_j), of shape (G, M).
    synthesis: np.ndarray = field(repr=False)

    @property
    def modes(self) -> int:
        """The number of eigenmodes M."""
        return len(self.eigenvalues)

    @property
    def grid(self) -> int:
        """The number of physical samples G."""
        return len(self.nodes)

    @property
    def wavenumbers(self) -> np.ndarray:
        """The mode indices k = 1..M."""
        return np.arange(1, self.modes + 1)

    def eigenfunction(self, k: int, x: Union[float, np.ndarray]) -> np.ndarray:
        """Evaluate phi_k at arbitrary points.

        Args:
            k (int): The mode index, starting at 1.
            x (Union[float, np.ndarray]): The evaluation points.

        Returns:
            np.ndarray: phi_k(x).
        """
        return np.sin(k * np.pi * (np.asarray(x, dtype=float) + 1) / 2)

    def evaluate(self, coeffs: np.ndarray, x: Union[float, np.ndarray]) -> np.ndarray:
        """Evaluate the expansion sum_k c_k phi_k at arbitrary points.

        Args:
            coeffs (np.ndarray): The coefficients c_k.
            x (Union[float, np.ndarray]): The evaluation points.

        Returns:
            np.ndarray: The values, with the shape of x.
        """
        x = np.asarray(x, dtype=float)
        phases = np.multiply.outer(x.ravel() + 1, self.wavenumbers) * (np.pi / 2)
        return (np.sin(phases) @ np.asarray(coeffs, dtype=float)).reshape(x.shape)

    def weight_power(self, alpha: float) -> np.ndarray:
        """The Henon weight |x|^alpha on the nodes. No node sits at the origin.

        Args:
            alpha (float): The weight exponent.

        Returns:
            np.ndarray: |x_j|^alpha.
        """
        if alpha == 0:
            return np.ones_like(self.nodes)

        return np.abs(self.nodes) ** alpha


class SpectralField:
    """A function on B, represented by its eigenbasis coefficients, with cached physical samples.

    Coefficients are read-only after construction. The sample cache is filled on first access; recomputing it is
    idempotent, so concurrent readers may race on it harmlessly.
    """

    def __init__(self, basis: BasisSpec, coeffs: np.ndarray):
        """Initialize the field.

        Args:
            basis (BasisSpec): The basis, in which the field is expanded.
            coeffs (np.ndarray): The M coefficients.

        Raises:
            DimensionMismatch: If the number of coefficients differs from the number of basis modes.
        """
        coeffs = np.array(coeffs, dtype=float)

        if coeffs.shape != (basis.modes,):
            raise DimensionMismatch(f"Expected {basis.modes} coefficients, got shape {coeffs.shape}.")

        coeffs.setflags(write=False)

        self.basis = basis
        self._coeffs = coeffs
        self._samples: Optional[np.ndarray] = None

    @property
    def coeffs(self) -> np.ndarray:
        """The read-only coefficient array."""
        return self._coeffs

    @property
    def samples(self) -> np.ndarray:
        """The samples on the physical grid."""
        if self._samples is None:
            samples = to_physical(self, self.basis)
            samples.setflags(write=False)
            self._samples = samples

        return self._samples

    @classmethod
    def zeros(cls, basis: BasisSpec) -> "SpectralField":
        """The zero field.

        Args:
            basis (BasisSpec): The basis.

        Returns:
            SpectralField: The field with vanishing coefficients.
        """
        return cls(basis, np.zeros(basis.modes))

    @classmethod
    def mode(cls, basis: BasisSpec, k: int) -> "SpectralField":
        """A single eigenfunction phi_k.

        Args:
            basis (BasisSpec): The basis.
            k (int): The mode index, starting at 1.

        Returns:
            SpectralField: The field phi_k.
        """
        coeffs = np.zeros(basis.modes)
        coeffs[k - 1] = 1.0
        return cls(basis, coeffs)

    def evaluate(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """Evaluate the field at arbitrary points, by direct summation.

        Args:
            x (Union[float, np.ndarray]): The evaluation points.

        Returns:
            np.ndarray: The values.
        """
        return self.basis.evaluate(self._coeffs, x)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        """Sum of two fields in the same basis."""
        return SpectralField(self.basis, self._coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        """Difference of two fields in the same basis."""
        return SpectralField(self.basis, self._coeffs - other.coeffs)

    def __mul__(self, factor: float) -> "SpectralField":
        """Multiplication by a scalar."""
        return SpectralField(self.basis, float(factor) * self._coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        """Negation."""
        return SpectralField(self.basis, -self._coeffs)

    def __repr__(self) -> str:
        """Short representation."""
        return f"SpectralField(modes={self.basis.modes}, l2={np.linalg.norm(self._coeffs):.6g})"


@lru_cache(maxsize=16)
def make_basis(config: ProblemConfig) -> BasisSpec:
    """Build the Dirichlet eigenbasis, the physical grid and the quadrature rule.

    Bases are immutable, and cached per configuration.

    Args:
        config (ProblemConfig): The problem configuration.

    Raises:
        UnsupportedDimension: If N != 1.

    Returns:
        BasisSpec: The basis.
    """
    if config.N != 1:
        logger.error("Only the one-dimensional ball has an implemented eigenbasis, got N=%d.", config.N)
        raise UnsupportedDimension(f"No eigenbasis for N={config.N}; only N=1 is implemented.")

    left_count = config.grid // 2
    right_count = config.grid - left_count

    left_nodes, left_weights = roots_legendre(left_count)
    right_nodes, right_weights = roots_legendre(right_count)

    # Map [-1, 1] onto [-1, 0] and [0, 1].
    nodes = np.concatenate([(left_nodes - 1) / 2, (right_nodes + 1) / 2])
    weights = np.concatenate([left_weights / 2, right_weights / 2])

    wavenumbers = np.arange(1, config.modes + 1)
    eigenvalues = (wavenumbers * np.pi / 2) ** 2
    synthesis = np.sin(np.multiply.outer(nodes + 1, wavenumbers) * (np.pi / 2))

    for array in (eigenvalues, nodes, weights, synthesis):
        array.setflags(write=False)

    logger.info("Built a basis of %d modes on %d split Gauss-Legendre nodes.", config.modes, config.grid)

    return BasisSpec(config, eigenvalues, nodes, weights, synthesis)


def _check_basis(field_basis: BasisSpec, basis: BasisSpec) -> None:
    """Check that a field lives in a compatible basis.

    Args:
        field_basis (BasisSpec): The basis of the field.
        basis (BasisSpec): The requested basis.

    Raises:
        DimensionMismatch: If modes or grids differ.
    """
    if field_basis is not basis and (field_basis.modes != basis.modes or field_basis.grid != basis.grid):
        raise DimensionMismatch(
            f"Field basis ({field_basis.modes} modes, {field_basis.grid} nodes) does not match "
            f"({basis.modes} modes, {basis.grid} nodes)."
        )


def to_physical(field: SpectralField, basis: BasisSpec) -> np.ndarray:
    """Synthesize the physical samples of a field.

    Args:
        field (SpectralField): The field.
        basis (BasisSpec): The basis, which defines the grid.

    Returns:
        np.ndarray: The G samples.
    """
    _check_basis(field.basis, basis)
    return basis.synthesis @ field.coeffs


def to_coefficients(samples: np.ndarray, basis: BasisSpec) -> SpectralField:
    """Project physical samples onto the eigenbasis, by quadrature.

    This is the adjoint of `to_physical` with respect to the weighted grid inner product, and its left inverse on
    band-limited fields.

    Args:
        samples (np.ndarray): The G samples.
        basis (BasisSpec): The basis.

    Raises:
        DimensionMismatch: If the number of samples differs from the grid size.

    Returns:
        SpectralField: The projected field.
    """
    samples = np.asarray(samples, dtype=float)

    if samples.shape != (basis.grid,):
        raise DimensionMismatch(f"Expected {basis.grid} samples, got shape {samples.shape}.")

    return SpectralField(basis, basis.synthesis.T @ (basis.weights * samples))


def grid_inner(f: np.ndarray, g: np.ndarray, basis: BasisSpec) -> float:
    """The quadrature inner product of two sampled functions.

    Args:
        f (np.ndarray): The samples of f.
        g (np.ndarray): The samples of g.
        basis (BasisSpec): The basis that defines the quadrature.

    Returns:
        float: sum_j w_j f(x_j) g(x_j).
    """
    return float(np.dot(basis.weights * f, g))


def frac_laplacian(field: SpectralField, s: float) -> SpectralField:
    """Apply the spectral fractional Laplacian (-Delta)^s.

    Args:
        field (SpectralField): The field.
        s (float): The order; s=0 is the identity, s=1 the Dirichlet Laplacian.

    Returns:
        SpectralField: The field with coefficients lambda_k^s u_k.
    """
    return SpectralField(field.basis, field.coeffs * field.basis.eigenvalues**s)


def hs_norm(field: SpectralField, s: float) -> float:
    """The H^s_0(B) norm (sum_k u_k^2 lambda_k^s)^(1/2).

    Args:
        field (SpectralField): The field.
        s (float): The order.

    Returns:
        float: The norm.
    """
    return float(np.sqrt(np.dot(field.coeffs**2, field.basis.eigenvalues**s)))


def weighted_integral(samples: np.ndarray, alpha: float, basis: BasisSpec) -> float:
    """Integrate |x|^alpha f(x) over (-1, 1), with the kink at 0 on the boundary of the two Gauss panels.

    Args:
        samples (np.ndarray): The samples of f on the grid.
        alpha (float): The weight exponent, nonnegative.
        basis (BasisSpec): The basis that defines the quadrature.

    Returns:
        float: The integral.
    """
    if alpha < 0:
        raise ConfigurationError(f"The weight exponent alpha={alpha} must be nonnegative.")

    return float(np.dot(basis.weights * basis.weight_power(alpha), samples))


def tail_energy(field: SpectralField, s: float) -> float:
    """The share of the H^s energy carried by the top 10 % of the modes.

    Args:
        field (SpectralField): The field.
        s (float): The order of the energy.

    Returns:
        float: The energy share in [0, 1]; zero for the zero field.
    """
    energy = field.coeffs**2 * field.basis.eigenvalues**s
    total = float(np.sum(energy))

    if total == 0:
        return 0.0

    tail_start = field.basis.modes - max(1, int(round(TAIL_SHARE * field.basis.modes)))
    return float(np.sum(energy[tail_start:])) / total
