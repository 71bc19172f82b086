"""Test sweeps, concentration diagnostics and the checks built on them."""
import logging
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from henonlab.analysis.asymptotics import (
    DegenerationReport,
    SweepPlan,
    SweepRecord,
    WindowTooSmall,
    bubble_remainder,
    criticality_limit_check,
    degeneration_check,
    diagnostics,
    identity_check,
    locate_peak,
    mass_fraction,
    measure_bound_check,
    profile_convergence,
    record_algebra,
    rescaled_window,
    run_sweep,
    sweep_trends,
)
from henonlab.helper.errors import ConfigurationError, NumericalFailure
from henonlab.optimization.solver import GroundState, SolverOptions, minimize_system
from henonlab.spectral.bubbles import bubble_U, radial_cutoff
from henonlab.spectral.core import ProblemConfig, SpectralField, make_basis, to_coefficients
from henonlab.spectral.energy import ExponentConfig, cpq

CONFIG = ProblemConfig(s=0.3, alpha=1.0, modes=32)
OPTIONS = SolverOptions()


def make_state(u: SpectralField, v: SpectralField = None, exponents: ExponentConfig = None) -> GroundState:
    """A state around given traces, without a solve."""
    return GroundState(
        u=u,
        v=v,
        quotient=1.0,
        multiplier=1.0,
        beta=1.0,
        converged=True,
        iterations=0,
        residual_norm=0.0,
        config=u.basis.config,
        alpha=0.0,
        exponent=4.0 if exponents is None else exponents.total,
        exponents=exponents,
        rescaled=True,
    )


def make_record(p_eps: float = 2.5, converged: bool = True, **values) -> SweepRecord:
    """A record with the given diagnostics."""
    return replace(SweepRecord.failed(p_eps, 2.0), converged=converged, **values)


def test_record_algebra():
    """lambda = M1^{-2/(N-2s)}, h = lambda^{N-(N-2s)(p+q)/2}."""
    lambda_eps, h_eps, ratio, lambda_bar = record_algebra(2.0, 4.0, 2.5, 2.0, ProblemConfig(s=0.3))

    assert lambda_eps == pytest.approx(2.0**-5)
    assert h_eps == pytest.approx(2.0**-0.5)
    assert ratio == pytest.approx(0.5)
    assert lambda_bar == pytest.approx(4.0**-5)


def test_record_algebra_clamps(caplog):
    """Peaks below 1 give h > 1, which is clamped and logged."""
    with caplog.at_level(logging.WARNING):
        _, h_eps, _, _ = record_algebra(0.5, 0.5, 2.5, 2.0, ProblemConfig(s=0.3))

    assert h_eps == 1.0
    assert "clamped" in caplog.text


def test_concentration_scale():
    """A peak M1 = 10 at N = 1, s = 0.3 has the scale 10^{-2/0.4} = 1e-5."""
    lambda_eps, _, _, _ = record_algebra(10.0, 10.0, 2.5, 2.0, ProblemConfig(s=0.3))

    assert lambda_eps == pytest.approx(1e-5, rel=1e-12)


@pytest.mark.parametrize("mode,location", [(1, 0.0), (3, 2 / 3)])
def test_locate_peak(mode: int, location: float):
    """Peaks are refined between nodes; among ties, the nonnegative one wins.

    Args:
        mode (int): The eigenfunction.
        location (float): Its maximum with nonnegative abscissa.
    """
    basis = make_basis(ProblemConfig(s=0.3, modes=64))
    x_max, peak = locate_peak(SpectralField.mode(basis, mode))

    assert x_max == pytest.approx(location, abs=1e-3)
    assert peak == pytest.approx(1.0, rel=1e-4)


def test_rescaled_window():
    """The window samples lambda^{(N-2s)/2} f(center + lambda xi), and must cover four scales."""
    basis = make_basis(ProblemConfig(s=0.3, modes=32))
    field = SpectralField.mode(basis, 2)

    xi, values = rescaled_window(field, 0.1, 0.05, 0.5, basis.config)

    assert xi[0] == pytest.approx(-10.0) and xi[-1] == pytest.approx(10.0)
    assert values == pytest.approx(0.05**0.2 * field.evaluate(0.1 + 0.05 * xi), rel=1e-13)

    with pytest.raises(WindowTooSmall):
        rescaled_window(field, 0.1, 0.05, 0.09, basis.config)


def test_mass_fraction():
    """The share of the constraint integral near the center matches the integral of the density."""
    basis = make_basis(ProblemConfig(s=0.3, modes=64))
    state = make_state(SpectralField.mode(basis, 1))
    exp = ExponentConfig(2.0, 2.0, basis.config.crit_exp)

    def density(x):
        return np.cos(np.pi * x / 2) ** 4

    expected = quad(density, -0.2, 0.2)[0] / quad(density, -1, 1)[0]

    assert mass_fraction(state, 0.0, 0.2, exp, 0.0) == pytest.approx(expected, abs=0.02)
    assert mass_fraction(state, 0.0, 2.0, exp, 0.0) == pytest.approx(1.0)

    with pytest.raises(ConfigurationError):
        mass_fraction(state, 0.0, 0.0, exp, 0.0)


def test_bubble_remainder():
    """Traces that equal their bubbles near the peak have a vanishing remainder."""
    config = ProblemConfig(s=0.3, modes=128)
    basis = make_basis(config)
    M1, ratio, scale = 2.0, 1.25, 0.3
    x = basis.nodes

    bubble = M1 * bubble_U(x / scale, 1, 0.3) * radial_cutoff(x, 0.0, 0.8)
    u = to_coefficients(bubble, basis)
    v = to_coefficients(bubble / ratio, basis)
    record = make_record(M1=M1, ratio=ratio, x_max=0.0, d_eps=1.0, lambda_eps=scale)

    assert bubble_remainder(make_state(u, v), record, config) < 1e-3

    perturbed = u + 0.2 * SpectralField.mode(basis, 4)
    assert bubble_remainder(make_state(perturbed, v), record, config) > 1e-2


def test_bubble_remainder_degenerate_inputs():
    """A peak on the boundary or traces that vanish near the peak leave the remainder undefined."""
    basis = make_basis(ProblemConfig(s=0.3, modes=32))
    zero = SpectralField.zeros(basis)
    mode = SpectralField.mode(basis, 1)

    on_boundary = make_record(M1=1.0, ratio=1.0, x_max=1.0, d_eps=0.0, lambda_eps=0.3)
    centered = make_record(M1=1.0, ratio=1.0, x_max=0.0, d_eps=1.0, lambda_eps=0.3)

    with pytest.raises(NumericalFailure):
        bubble_remainder(make_state(mode, mode), on_boundary, CONFIG)

    with pytest.raises(NumericalFailure):
        bubble_remainder(make_state(zero, zero), centered, CONFIG)


def test_sweep_plan_validation():
    """Plans need increasing subcritical exponents above 1."""
    SweepPlan(2.0, (2.0, 2.5), CONFIG)

    for p_values in [(), (1.0, 2.0), (2.0, 3.0), (2.5, 2.5), (2.5, 2.0)]:
        with pytest.raises(ConfigurationError):
            SweepPlan(2.0, p_values, CONFIG)

    assert SweepPlan(2.0, [2, 2.5], CONFIG).exponents(2.5) == ExponentConfig(2.5, 2.0, CONFIG.crit_exp)


def test_record_columns():
    """The table columns and their order."""
    assert SweepRecord.columns() == [
        "p_eps",
        "q",
        "quotient",
        "multiplier",
        "M1",
        "M2",
        "ratio",
        "x_max",
        "d_eps",
        "lambda_eps",
        "d_over_lambda",
        "h_eps",
        "remainder_rel",
        "amp_ratio_fit",
        "iterations",
        "converged",
    ]

    record = SweepRecord.failed(2.5, 2.0)
    assert record.row()[:2] == [2.5, 2.0]
    assert math.isnan(record.quotient) and not record.converged


@pytest.fixture(name="sweep", scope="module")
def fixture_sweep():
    """A short sweep, solved on two workers."""
    plan = SweepPlan(2.0, (2.0, 2.4), CONFIG, OPTIONS)
    return plan, run_sweep(plan, threads=2)


def test_sweep(sweep):
    """Every point is solved and diagnosed, in plan order."""
    plan, records = sweep

    assert [record.p_eps for record in records] == list(plan.p_values)

    for record in records:
        assert record.converged
        assert record.M1 > 0 and record.M2 > 0
        assert record.ratio == pytest.approx(record.M1 / record.M2)
        assert record.d_eps == pytest.approx(1 - abs(record.x_max))
        assert 0 < record.h_eps <= 1
        assert 0 < record.mass_fraction <= 1
        assert record.state is not None and record.state.rescaled


def test_symmetric_diagnostics():
    """A symmetric state peaks at the origin, at distance 1 from the boundary."""
    config = ProblemConfig(s=0.3, alpha=0.0, modes=32)
    exponents = ExponentConfig(2.0, 2.0, config.crit_exp)
    state = minimize_system(config, exponents, opts=SolverOptions(init_center=0.0))

    record = diagnostics(state, config)

    assert record.x_max == pytest.approx(0.0, abs=1e-6)
    assert record.d_eps == pytest.approx(1.0, abs=1e-6)
    assert record.ratio == pytest.approx(1.0, rel=1e-8)


def test_sweep_is_deterministic(sweep):
    """Solving points sequentially reproduces the concurrent table."""
    plan, records = sweep
    sequential = run_sweep(plan, threads=1)

    np.testing.assert_equal([record.row() for record in sequential], [record.row() for record in records])


def test_warm_started_sweep(sweep):
    """Warm starts reach the same minima."""
    plan, records = sweep
    warm = run_sweep(replace(plan, warm_start=True))

    for cold_record, warm_record in zip(records, warm):
        assert warm_record.quotient == pytest.approx(cold_record.quotient, rel=1e-8)


def test_sweep_trends():
    """Trends are judged over the last four records."""
    records = [
        make_record(
            p_eps=2.0 + 0.1 * index,
            M1=1.0 + index,
            d_eps=1.0 / (1 + index),
            d_over_lambda=10.0 * (1 + index),
            remainder_rel=0.5 / (1 + index),
            mass_fraction=0.6 + 0.07 * index,
        )
        for index in range(6)
    ]

    report = sweep_trends(records)
    assert report.passed
    assert report.final_mass_fraction == pytest.approx(0.95)

    records[-2] = replace(records[-2], M1=100.0)
    assert not sweep_trends(records).M1_increasing
    assert not sweep_trends(records).passed


def test_criticality_limit_check(caplog):
    """Gaps to C_{p,q} S-hat are measured on converged records."""
    s_hat = 0.75
    p_values = [2.2, 2.4, 2.6, 2.8, 2.9]
    records = [
        make_record(p, quotient=cpq(p, 2.0) * s_hat * (1 + 0.1 / (index + 1))) for index, p in enumerate(p_values)
    ]
    records.append(make_record(2.95, converged=False, quotient=1.0))

    report = criticality_limit_check(records, s_hat)

    assert len(report.gaps) == 5
    assert report.shrinking
    assert report.final_relative_gap == pytest.approx(0.02)

    with caplog.at_level(logging.WARNING):
        short = criticality_limit_check(records[:3], s_hat)

    assert not short.shrinking
    assert "not judged" in caplog.text


def test_measure_bound_check():
    """The rescaled energy beta^2 S against C_{p,q} S-hat gamma^{2/2*_s}."""
    config = ProblemConfig(s=0.3)
    record = make_record(2.5, quotient=3.0)
    beta = 1.5 ** (1 / 2.5)

    report = measure_bound_check(record, 0.5, 0.75, config)

    assert report.energy == pytest.approx(beta**2 * 3.0)
    assert report.gamma == pytest.approx(0.5 * beta**4.5)
    assert report.bound == pytest.approx(cpq(2.5, 2.0) * 0.75 * report.gamma ** (2 / 5))
    assert report.holds

    with pytest.raises(ConfigurationError):
        measure_bound_check(record, 0.5, 0.75)


def test_profile_convergence_needs_records():
    """At least two diagnosed records are needed."""
    with pytest.raises(ConfigurationError):
        profile_convergence([make_record()], CONFIG)


def test_identity_check():
    """Two independent solves confirm S_sys = C_{p,q} S_scal, with u / v = sqrt(p/q)."""
    report = identity_check(CONFIG, 2.0, 1.5, 1.0, OPTIONS)

    assert report.converged
    assert report.cpq == pytest.approx(cpq(2.0, 1.5))
    assert report.quotient_ratio == pytest.approx(report.cpq, rel=1e-3)
    assert report.passed

    with pytest.raises(ConfigurationError):
        identity_check(CONFIG, 3.0, 2.0, 1.0, OPTIONS)


def test_degeneration_report():
    """Non-attainment shows as decreasing quotients and growing peaks, without a plateau."""
    assert DegenerationReport([16, 32, 64], [1.0, 0.9, 0.85], [2.0, 3.0, 4.5], [False] * 3).passed
    assert not DegenerationReport([16, 32, 64], [1.0, 0.9, 0.8999], [2.0, 3.0, 4.5], [False] * 3).passed
    assert not DegenerationReport([16, 32, 64], [1.0, 0.9, 0.85], [2.0, 3.0, 2.5], [False] * 3).passed


def test_degeneration_check():
    """Critical solves run over every truncation, converged or not."""
    report = degeneration_check(CONFIG, modes_list=(16, 32), opts=SolverOptions(max_iters=20, restarts=0))

    assert report.modes == [16, 32]
    assert len(report.quotients) == 2 and len(report.peaks) == 2
    assert all(np.isfinite(report.quotients))
