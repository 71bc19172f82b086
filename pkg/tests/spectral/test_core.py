"""Test the eigenbasis, the transforms and the fractional Laplacian."""
import numpy as np
import pytest

from henonlab.helper.errors import ConfigurationError
from henonlab.spectral.core import (
    DimensionMismatch,
    ProblemConfig,
    SpectralField,
    UnsupportedDimension,
    frac_laplacian,
    grid_inner,
    hs_norm,
    make_basis,
    tail_energy,
    to_coefficients,
    to_physical,
    weighted_integral,
)


def random_field(basis, seed: int = 0) -> SpectralField:
    """A field with decaying random coefficients."""
    rng = np.random.default_rng(seed)
    return SpectralField(basis, rng.standard_normal(basis.modes) / basis.wavenumbers)


@pytest.mark.parametrize(
    "parameters",
    [
        {"s": 0.0},
        {"s": 1.0},
        {"s": 0.6},
        {"s": 0.3, "alpha": -1.0},
        {"s": 0.3, "modes": 4},
        {"s": 0.3, "modes": 16, "grid": 32},
    ],
)
def test_problem_config_validation(parameters):
    """Invalid parameters are configuration errors.

    Args:
        parameters (dict): The configuration parameters.
    """
    with pytest.raises(ConfigurationError):
        ProblemConfig(**parameters)


def test_problem_config():
    """The grid defaults to four samples per mode, and the critical exponent is 2N/(N-2s)."""
    config = ProblemConfig(s=0.3, modes=32)

    assert config.grid == 128
    assert config.crit_exp == pytest.approx(5.0)
    assert config.with_modes(64).grid == 256
    assert config.with_alpha(1.0).alpha == 1.0


def test_higher_dimensions_are_unsupported():
    """Only the interval has an eigenbasis."""
    with pytest.raises(UnsupportedDimension):
        make_basis(ProblemConfig(s=0.3, N=2))


def test_basis_is_cached_and_read_only():
    """Equal configurations share one immutable basis."""
    basis = make_basis(ProblemConfig(s=0.3, modes=16))

    assert basis is make_basis(ProblemConfig(s=0.3, modes=16, grid=64))
    assert basis.nodes[0] > -1 and basis.nodes[-1] < 1
    assert np.sum(basis.weights) == pytest.approx(2.0, rel=1e-14)

    with pytest.raises(ValueError):
        basis.eigenvalues[0] = 0.0


@pytest.mark.parametrize("modes", [16, 32, 64])
def test_transform_round_trip(modes: int):
    """Projection inverts synthesis on band-limited fields.

    Args:
        modes (int): The number of modes.
    """
    basis = make_basis(ProblemConfig(s=0.3, modes=modes))
    field = random_field(basis)

    recovered = to_coefficients(to_physical(field, basis), basis)

    assert np.max(np.abs(recovered.coeffs - field.coeffs)) < 1e-12


def test_parseval():
    """The quadrature inner product equals the coefficient inner product."""
    basis = make_basis(ProblemConfig(s=0.3, modes=32))
    f, g = random_field(basis, 1), random_field(basis, 2)

    assert grid_inner(f.samples, g.samples, basis) == pytest.approx(np.dot(f.coeffs, g.coeffs), rel=1e-10)
    assert grid_inner(f.samples, f.samples, basis) == pytest.approx(np.sum(f.coeffs**2), rel=1e-10)


def test_samples_and_evaluation_agree():
    """Direct evaluation reproduces the cached samples."""
    basis = make_basis(ProblemConfig(s=0.3, modes=16))
    field = random_field(basis)

    assert np.allclose(field.evaluate(basis.nodes), field.samples, rtol=0, atol=1e-13)
    assert field.evaluate(np.array([-1.0, 1.0])) == pytest.approx([0.0, 0.0], abs=1e-13)


@pytest.mark.parametrize("s", [0.0, 0.25, 0.5, 1.0])
@pytest.mark.parametrize("k", [1, 5, 16])
def test_eigen_mapping(s: float, k: int):
    """Eigenfunctions are mapped to lambda_k^s times themselves.

    Args:
        s (float): The order.
        k (int): The mode.
    """
    basis = make_basis(ProblemConfig(s=0.3, modes=16))
    image = frac_laplacian(SpectralField.mode(basis, k), s)

    expected = np.zeros(basis.modes)
    expected[k - 1] = (k * np.pi / 2) ** (2 * s)

    assert np.max(np.abs(image.coeffs - expected)) <= 1e-12 * expected[k - 1]
    assert hs_norm(SpectralField.mode(basis, k), s) == pytest.approx((k * np.pi / 2) ** s, rel=1e-14)


def test_semigroup():
    """(-Delta)^a (-Delta)^b = (-Delta)^{a+b}."""
    basis = make_basis(ProblemConfig(s=0.3, modes=32))
    field = random_field(basis)

    composed = frac_laplacian(frac_laplacian(field, 0.3), 0.45).coeffs
    direct = frac_laplacian(field, 0.75).coeffs

    assert np.max(np.abs(composed - direct) / np.abs(direct)) < 1e-13


def test_laplacian_is_second_derivative():
    """At s = 1, the operator is -d^2/dx^2."""
    basis = make_basis(ProblemConfig(s=0.3, modes=16))
    k = 3
    x = np.linspace(-0.9, 0.9, 7)

    second_derivative = -((k * np.pi / 2) ** 2) * basis.eigenfunction(k, x)
    image = frac_laplacian(SpectralField.mode(basis, k), 1.0)

    assert image.evaluate(x) == pytest.approx(-second_derivative, abs=1e-12)


@pytest.mark.parametrize("alpha,exponent,expected", [(0.0, 2, 2 / 3), (1.0, 2, 0.5), (2.0, 4, 2 / 7)])
def test_weighted_integral(alpha: float, exponent: int, expected: float):
    """The split Gauss rule integrates polynomials against |x|^alpha exactly.

    Args:
        alpha (float): The weight exponent.
        exponent (int): The power of x.
        expected (float): The integral of |x|^alpha x^exponent over (-1, 1).
    """
    basis = make_basis(ProblemConfig(s=0.3, modes=16))

    assert weighted_integral(basis.nodes**exponent, alpha, basis) == pytest.approx(expected, rel=1e-13)


def test_weighted_integral_rejects_negative_alpha():
    """Negative weight exponents are configuration errors."""
    basis = make_basis(ProblemConfig(s=0.3, modes=16))

    with pytest.raises(ConfigurationError):
        weighted_integral(np.ones(basis.grid), -0.5, basis)


def test_tail_energy():
    """The top tenth of the modes carries all the energy of phi_M, none of phi_1."""
    basis = make_basis(ProblemConfig(s=0.3, modes=20))

    assert tail_energy(SpectralField.zeros(basis), 0.3) == 0.0
    assert tail_energy(SpectralField.mode(basis, 1), 0.3) == 0.0
    assert tail_energy(SpectralField.mode(basis, 20), 0.3) == pytest.approx(1.0)


def test_dimension_mismatch():
    """Arrays of the wrong size are rejected."""
    basis = make_basis(ProblemConfig(s=0.3, modes=16))
    other = make_basis(ProblemConfig(s=0.3, modes=32))

    with pytest.raises(DimensionMismatch):
        SpectralField(basis, np.zeros(17))

    with pytest.raises(DimensionMismatch):
        to_coefficients(np.zeros(10), basis)

    with pytest.raises(DimensionMismatch):
        to_physical(random_field(other), basis)


def test_field_arithmetic():
    """Fields form a vector space over their coefficients."""
    basis = make_basis(ProblemConfig(s=0.3, modes=16))
    f, g = random_field(basis, 1), random_field(basis, 2)

    assert np.allclose((f + g).coeffs, f.coeffs + g.coeffs)
    assert np.allclose((f - g).coeffs, f.coeffs - g.coeffs)
    assert np.allclose((2 * f).coeffs, (f * 2).coeffs)
    assert np.allclose((-f).coeffs, -f.coeffs)

    with pytest.raises(ValueError):
        f.coeffs[0] = 1.0
