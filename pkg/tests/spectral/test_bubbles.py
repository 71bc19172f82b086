"""Test bubbles, truncated bubbles, Kelvin transforms and profile fits."""
import numpy as np
import pytest

from henonlab.helper.errors import ConfigurationError
from henonlab.spectral.bubbles import (
    BubbleSpec,
    CutoffEscapesDomain,
    FitDegenerate,
    PoleSingularity,
    bubble_family,
    bubble_U,
    bubble_Ueps,
    critical_bubble,
    fit_profile,
    kelvin,
    radial_cutoff,
    sharp_sobolev_constant,
    smoothstep,
    sobolev_constant_estimate,
    truncated_bubble,
)
from henonlab.spectral.core import ProblemConfig, SpectralField, make_basis

CONFIG = ProblemConfig(s=0.3, modes=256)


@pytest.fixture(name="points")
def fixture_points() -> np.ndarray:
    """100 random points, away from the poles used below."""
    return np.random.default_rng(7).uniform(-5, 5, 100)


def test_bubble_scaling(points: np.ndarray):
    """U_eps is a dilate of U, and the critical family contains U."""
    eps, s = 0.04, 0.3

    assert bubble_U(0.0, 1, s) == 1.0
    assert bubble_Ueps(points, eps, 1, s) == pytest.approx(
        eps ** ((2 * s - 1) / 2) * bubble_U(points / np.sqrt(eps), 1, s), rel=1e-13
    )
    assert critical_bubble(points, 1.0, 0.0, 1.0, 1, s) == pytest.approx(bubble_U(points, 1, s), rel=1e-13)

    with pytest.raises(ConfigurationError):
        bubble_Ueps(points, 0.0, 1, s)

    with pytest.raises(ConfigurationError):
        critical_bubble(points, -1.0)


@pytest.mark.parametrize("s", [0.1, 0.3, 0.45])
def test_kelvin_fixes_the_bubble(points: np.ndarray, s: float):
    """The Kelvin transform with pole 0 maps U onto itself.

    Args:
        points (np.ndarray): Random points.
        s (float): The fractional order.
    """
    transformed = kelvin(lambda x: bubble_U(x, 1, s), 0.0, 1, s)

    assert np.max(np.abs(transformed(points) / bubble_U(points, 1, s) - 1)) < 1e-12


@pytest.mark.parametrize("pole", [0.25, -1.5])
def test_kelvin_is_an_involution(points: np.ndarray, pole: float):
    """Applying the Kelvin transform twice is the identity.

    Args:
        points (np.ndarray): Random points.
        pole (float): The pole.
    """
    s = 0.3

    def profile(x):
        return critical_bubble(x, 0.5, 0.2, 1.0, 1, s)

    twice = kelvin(kelvin(profile, pole, 1, s), pole, 1, s)

    assert np.max(np.abs(twice(points) / profile(points) - 1)) < 1e-12


def test_kelvin_pole():
    """Evaluating at the pole is an error."""
    transformed = kelvin(lambda x: bubble_U(x, 1, 0.3), 0.5, 1, 0.3)

    with pytest.raises(PoleSingularity):
        transformed(np.array([0.0, 0.5]))


def test_kelvin_of_a_field():
    """Fields are evaluated spectrally."""
    basis = make_basis(ProblemConfig(s=0.3, modes=16))
    field = SpectralField.mode(basis, 2)
    x = np.array([-0.5, 0.3])
    transformed = kelvin(field, 3.0, 1, 0.3)

    expected = np.abs(x - 3.0) ** (0.6 - 1) * field.evaluate((x - 3.0) / (x - 3.0) ** 2 + 3.0)
    assert transformed(x) == pytest.approx(expected, rel=1e-13)


def test_smoothstep_and_cutoff():
    """The cutoff is 1 on its plateau, 0 outside its support."""
    assert smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])) == pytest.approx([0.0, 0.0, 0.5, 1.0, 1.0])

    x = np.array([0.0, 0.2, -0.25, 0.5, 0.75, -1.0])
    assert radial_cutoff(x, 0.0, 0.5) == pytest.approx([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


def test_standard_bubble_spec():
    """The standard construction touches the boundary, and its cutoff slope obeys the bound."""
    spec = BubbleSpec.standard(1e-2, 0.3)

    assert spec.radius == pytest.approx(1 / np.log(100))
    assert spec.center + spec.radius == pytest.approx(1.0)
    assert spec.peak == pytest.approx(1e-2 ** (-0.2))
    spec.check_domain()

    x = np.linspace(spec.center - spec.radius, spec.center + spec.radius, 200001)
    slope = np.max(np.abs(np.diff(spec.cutoff(x)) / np.diff(x)))
    assert slope == pytest.approx(spec.gradient_bound, rel=1e-3)

    assert spec.samples(spec.center) == pytest.approx(spec.peak)
    assert spec.samples(1.0) == pytest.approx(0.0)

    with pytest.raises(ConfigurationError):
        BubbleSpec.standard(0.5, 0.3)


def test_cutoff_escapes_domain():
    """A cutoff that crosses the boundary is rejected."""
    spec = BubbleSpec(eps=1e-2, center=0.9, s=0.3, N=1, radius=0.2)

    with pytest.raises(CutoffEscapesDomain):
        truncated_bubble(spec, make_basis(CONFIG))


def test_bubble_family_decreases():
    """The truncated-bubble quotients decrease toward the best constant over four halvings."""
    family = bubble_family(CONFIG, 1e-2, 4)
    sharp = sharp_sobolev_constant(1, 0.3)

    assert len(family.quotients) == 5
    assert all(later < earlier for earlier, later in zip(family.quotients, family.quotients[1:]))
    assert all(later < earlier for earlier, later in zip(family.gauges, family.gauges[1:]))
    assert min(family.quotients) > sharp * (1 - 1e-6)

    estimate = sobolev_constant_estimate(CONFIG, 1e-2, 4)
    assert estimate == pytest.approx(family.limit)
    assert estimate == pytest.approx(sharp, rel=0.1)

    with pytest.raises(ConfigurationError):
        bubble_family(CONFIG, 1e-2, 0)


def test_sharp_sobolev_constant():
    """The closed form at N = 1, s = 0.3."""
    assert sharp_sobolev_constant(1, 0.3) == pytest.approx(0.76394, rel=1e-4)

    with pytest.raises(ConfigurationError):
        sharp_sobolev_constant(1, 0.5)


def test_fit_profile():
    """A pair of bubbles with shared scale and center is recovered exactly."""
    config = ProblemConfig(s=0.3, modes=16)
    xi = np.linspace(-20, 20, 801)
    shape = bubble_U((xi - 0.3) / 1.5, 1, 0.3)

    fit = fit_profile(xi, 2.0 * shape, 1.25 * shape, config)

    assert fit.a == pytest.approx(2.0, rel=1e-8)
    assert fit.b == pytest.approx(1.25, rel=1e-8)
    assert fit.scale == pytest.approx(1.5, rel=1e-8)
    assert fit.center == pytest.approx(0.3, abs=1e-8)
    assert fit.amplitude_ratio == pytest.approx(1.6, rel=1e-8)
    assert fit.residual < 1e-8


def test_fit_profile_needs_resolved_peaks():
    """A peak that covers fewer than eight samples cannot be fitted."""
    config = ProblemConfig(s=0.3, modes=16)
    xi = np.linspace(-20, 20, 801)
    shape = bubble_U(xi / 0.01, 1, 0.3)

    with pytest.raises(FitDegenerate):
        fit_profile(xi, shape, shape, config)
