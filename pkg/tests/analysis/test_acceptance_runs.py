"""Full-size runs of the concentration sweep, the identity and the degeneration check.

These take minutes; deselect them with `-m "not slow"`.
"""
import numpy as np
import pytest

from henonlab.analysis.asymptotics import (
    SweepPlan,
    criticality_limit_check,
    degeneration_check,
    identity_check,
    profile_convergence,
    run_sweep,
    sweep_trends,
)
from henonlab.spectral.bubbles import sobolev_constant_estimate
from henonlab.spectral.core import ProblemConfig

pytestmark = pytest.mark.slow


@pytest.fixture(name="acceptance_sweep", scope="module")
def fixture_acceptance_sweep():
    """s = 0.3, q = 2, p from 2.0 to 2.9, alpha = 1, 512 modes."""
    config = ProblemConfig(s=0.3, alpha=1.0, modes=512)
    plan = SweepPlan(2.0, tuple(np.round(np.linspace(2.0, 2.9, 10), 10)), config)
    return config, run_sweep(plan)


def test_concentration_trends(acceptance_sweep):
    """Peaks grow and move to the boundary, and the mass concentrates near the peak."""
    _, records = acceptance_sweep
    trends = sweep_trends(records)

    assert len(records) == 10
    assert trends.M1_increasing
    assert trends.d_eps_decreasing
    assert trends.d_over_lambda_increasing
    assert trends.remainder_decreasing
    assert trends.mass_fraction_increasing
    assert trends.final_mass_fraction >= 0.9


def test_amplitude_ratio(acceptance_sweep):
    """The fitted and the measured amplitude ratios approach sqrt(p / q)."""
    config, records = acceptance_sweep
    final = records[-1]
    target = np.sqrt(final.p_eps / final.q)

    assert final.amp_ratio_fit == pytest.approx(target, rel=0.1)
    assert final.ratio == pytest.approx(target, rel=0.1)

    report = profile_convergence(records[-3:], config)
    assert report.symmetry_decreasing


def test_critical_limit(acceptance_sweep):
    """The quotients approach C_{p,q} times the best constant."""
    config, records = acceptance_sweep
    report = criticality_limit_check(records, sobolev_constant_estimate(config))

    assert report.final_relative_gap < 0.05
    assert report.shrinking


@pytest.mark.parametrize("alpha", [0.0, 1.0])
@pytest.mark.parametrize("p,q", [(2.0, 2.0), (2.5, 1.5), (3.0, 1.5)])
def test_identity(p: float, q: float, alpha: float):
    """S_sys = C_{p,q} S_scal at 256 modes.

    Args:
        p (float): The first exponent.
        q (float): The second exponent.
        alpha (float): The weight exponent.
    """
    report = identity_check(ProblemConfig(s=0.3, modes=256, grid=1024), p, q, alpha)

    assert report.passed


def test_non_attainment():
    """At the critical exponent, refining the truncation keeps lowering the quotient and raising the peak."""
    report = degeneration_check(ProblemConfig(s=0.3, alpha=1.0), modes_list=(128, 256, 512))

    assert report.quotient_decreasing
    assert report.peak_increasing
    assert not report.plateau
