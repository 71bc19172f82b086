"""The batch front end of henonlab.

Every command reads one JSON settings file and writes its results, along with a run manifest, into an output
directory. Exit codes: 0 on success, 1 for configuration errors, 2 for non-convergence or a failed invariant, 3 for any
other numerical failure.
"""
import argparse
import logging
import math
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

import henonlab
from henonlab.analysis.asymptotics import (
    SweepRecord,
    criticality_limit_check,
    degeneration_check,
    diagnostics,
    identity_check,
    measure_bound_check,
    profile_convergence,
    run_sweep,
    sweep_trends,
)
from henonlab.application.manifest import RunManifest, WarningCounter, write_csv, write_json
from henonlab.helper.conversion import relative_difference
from henonlab.helper.errors import ConfigurationError, NumericalFailure
from henonlab.helper.extrapolation import ExtrapolationUnstable, check_monotone
from henonlab.helper.settings import HenonSettings
from henonlab.optimization.solver import (
    NotConverged,
    energy_identity_defect,
    lagrange_rescale,
    minimize_system,
    multiplier_estimates,
)
from henonlab.spectral.bubbles import (
    MONOTONE_TOLERANCE,
    bubble_family,
    bubble_U,
    critical_bubble,
    kelvin,
    sharp_sobolev_constant,
    sobolev_constant_estimate,
)
from henonlab.spectral.core import SpectralField, frac_laplacian, hs_norm, make_basis
from henonlab.spectral.extension import (
    cylinder_energy,
    ks_constant,
    neumann_limit,
    poisson_extension_W,
    theta_profile,
)

# A logger for this module
logger = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_CONFIGURATION = 1
EXIT_FAILED = 2
EXIT_NUMERICAL = 3

# Number of random points for the Kelvin checks.
KELVIN_POINTS = 100

# Height at which the Poisson extension is compared with its trace.
POISSON_HEIGHT = 1e-6

Command = Callable[[HenonSettings, Path, RunManifest], int]


def _bound(value: float, tolerance: float) -> Dict[str, Any]:
    """An invariant of the form value <= tolerance; NaN fails."""
    return {"value": value, "tolerance": tolerance, "passed": bool(value <= tolerance)}


def _flag(passed: bool, **measured: Any) -> Dict[str, Any]:
    """A yes/no invariant, with its measured values."""
    return {"passed": bool(passed), **measured}


def _status(invariants: Dict[str, Dict[str, Any]]) -> int:
    """The exit status for a set of mandatory invariants."""
    failed = [name for name, invariant in invariants.items() if not invariant["passed"]]

    if failed:
        logger.warning("Failed invariants: %s.", ", ".join(failed))
        return EXIT_FAILED

    return EXIT_SUCCESS


def _record_summary(record: SweepRecord) -> Dict[str, Any]:
    """The scalar fields of a sweep record."""
    return {item.name: getattr(record, item.name) for item in fields(record) if item.name not in ("fit", "state")}


def cmd_solve(settings: HenonSettings, out: Path, manifest: RunManifest) -> int:
    """Solve the system once, and write the rescaled solution and its diagnostics.

    Args:
        settings (HenonSettings): The settings.
        out (Path): The output directory.
        manifest (RunManifest): The manifest of the run.

    Returns:
        int: The exit status.
    """
    config = settings.problem_config()
    exp = settings.exponent_config()

    state = minimize_system(config, exp, opts=settings.solver_options())
    rescaled = lagrange_rescale(state)
    estimates = multiplier_estimates(state)

    solution_path = out / "solution.csv"
    rows = zip(rescaled.u.basis.wavenumbers, rescaled.u.coeffs, rescaled.v.coeffs)
    write_csv(solution_path, ["k", "u", "v"], [list(row) for row in rows])
    manifest.register(solution_path)

    try:
        record: Optional[Dict[str, Any]] = _record_summary(diagnostics(state, config))

    except NumericalFailure as error:
        logger.warning("Concentration diagnostics failed: %s", error)
        record = None

    report = {
        "criticality": exp.criticality,
        "quotient": state.quotient,
        "multiplier": state.multiplier,
        "beta": state.beta,
        "iterations": state.iterations,
        "converged": state.converged,
        "stationarity": state.residual_norm,
        "residual": rescaled.residual_norm,
        "multiplier_estimates": {**asdict(estimates), "relative_gap": estimates.relative_gap},
        "energy_identity_defect": energy_identity_defect(state),
        "diagnostics": record,
    }

    report_path = out / "solve.json"
    write_json(report_path, report)
    manifest.register(report_path)

    manifest.complete = True
    return EXIT_SUCCESS


def cmd_sweep(settings: HenonSettings, out: Path, manifest: RunManifest) -> int:
    """Run the exponent sweep, and write its table and the limit checks.

    Unconverged points keep their row, flagged converged=false; they are counted as warnings in the manifest.

    Args:
        settings (HenonSettings): The settings.
        out (Path): The output directory.
        manifest (RunManifest): The manifest of the run.

    Returns:
        int: The exit status.
    """
    plan = settings.sweep_plan()
    records = run_sweep(plan)

    table_path = out / "sweep.csv"
    write_csv(table_path, SweepRecord.columns(), [record.row() for record in records])
    manifest.register(table_path)

    trends = sweep_trends(records)
    report: Dict[str, Any] = {
        "records": [_record_summary(record) for record in records],
        "trends": {**asdict(trends), "passed": trends.passed},
        "criticality": None,
        "measure_bound": None,
        "profile_convergence": None,
    }

    bubble = settings.config["bubble"]

    try:
        S_hat = sobolev_constant_estimate(plan.config, bubble["eps0"], bubble["halvings"])
        criticality = criticality_limit_check(records, S_hat)
        report["criticality"] = {**asdict(criticality), "final_relative_gap": criticality.final_relative_gap}

        converged = [record for record in records if record.converged and math.isfinite(record.mass_fraction)]

        if converged:
            bound = measure_bound_check(converged[-1], converged[-1].mass_fraction, S_hat, plan.config)
            report["measure_bound"] = {**asdict(bound), "holds": bound.holds}

    except NumericalFailure as error:
        logger.warning("No critical limit check: %s", error)

    try:
        profiles = profile_convergence(records, plan.config)
        report["profile_convergence"] = {
            **asdict(profiles),
            "ratio_errors": profiles.ratio_errors,
            "symmetry_decreasing": profiles.symmetry_decreasing,
        }

    except (NumericalFailure, ConfigurationError) as error:
        logger.warning("No profile convergence report: %s", error)

    report_path = out / "sweep_report.json"
    write_json(report_path, report)
    manifest.register(report_path)

    manifest.complete = True
    return EXIT_SUCCESS


def cmd_identity(settings: HenonSettings, out: Path, manifest: RunManifest) -> int:
    """Check the scalar-to-system identity for every configured exponent pair and weight exponent.

    Args:
        settings (HenonSettings): The settings.
        out (Path): The output directory.
        manifest (RunManifest): The manifest of the run.

    Returns:
        int: The exit status; 2 if any identity fails.
    """
    config = settings.problem_config()
    options = settings.solver_options()
    section = settings.config["identity"]

    checks: List[Dict[str, Any]] = []
    invariants: Dict[str, Dict[str, Any]] = {}

    for pair in section["pairs"]:
        if len(pair) != 2:
            raise ConfigurationError(f"Identity pairs need two exponents, got {pair}.")

        p, q = pair

        for alpha in section["alpha_values"]:
            check = identity_check(config, p, q, alpha, options)
            checks.append({**asdict(check), "quotient_ratio": check.quotient_ratio, "passed": check.passed})
            invariants[f"p={p!r},q={q!r},alpha={alpha!r}"] = _flag(
                check.passed, deviation=check.deviation, ratio_deviation=check.ratio_deviation
            )

    report_path = out / "identity.json"
    write_json(report_path, {"checks": checks, "invariants": invariants})
    manifest.register(report_path)

    manifest.complete = True
    return _status(invariants)


def _kelvin_defects(config, seed: int) -> Dict[str, float]:
    """Relative defects of the Kelvin involution and of the bubble fixed point, on random points."""
    N, s = config.N, config.s
    points = np.random.default_rng(seed).uniform(-5, 5, KELVIN_POINTS)

    def shifted(x):
        return critical_bubble(x, 0.5, 0.2, 1.0, N, s)

    def bubble(x):
        return bubble_U(x, N, s)

    twice = kelvin(kelvin(shifted, 0.25, N, s), 0.25, N, s)
    fixed = kelvin(bubble, 0.0, N, s)

    return {
        "involution": float(np.max(np.abs(twice(points) - shifted(points)) / np.abs(shifted(points)))),
        "fixed_point": float(np.max(np.abs(fixed(points) - bubble(points)) / np.abs(bubble(points)))),
    }


def cmd_bubble(settings: HenonSettings, out: Path, manifest: RunManifest) -> int:
    """Evaluate the truncated-bubble family, the Kelvin algebra, and the non-attainment signature at criticality.

    Args:
        settings (HenonSettings): The settings.
        out (Path): The output directory.
        manifest (RunManifest): The manifest of the run.

    Returns:
        int: The exit status; 2 if any invariant fails.
    """
    config = settings.problem_config()
    section = settings.config["bubble"]

    family = bubble_family(config, section["eps0"], section["halvings"])

    try:
        check_monotone(family.quotients, decreasing=True, tolerance=MONOTONE_TOLERANCE)
        monotone = True
        S_hat: Optional[float] = family.limit

    except ExtrapolationUnstable as error:
        logger.warning("Bubble quotients are not monotone: %s", error)
        monotone = False
        S_hat = None

    sharp = sharp_sobolev_constant(config.N, config.s)
    defects = _kelvin_defects(config, section["seed"])

    invariants = {
        "quotients_decreasing": _flag(monotone),
        "kelvin_involution": _bound(defects["involution"], 1e-12),
        "kelvin_fixed_point": _bound(defects["fixed_point"], 1e-12),
    }

    report: Dict[str, Any] = {
        "family": asdict(family),
        "S_hat": S_hat,
        "sharp_constant": sharp,
        "relative_gap_to_sharp": None if S_hat is None else relative_difference(S_hat, sharp),
        "degeneration": None,
    }

    if section["degeneration_modes"]:
        degeneration = degeneration_check(
            config, modes_list=section["degeneration_modes"], opts=settings.solver_options()
        )
        report["degeneration"] = {**asdict(degeneration), "plateau": degeneration.plateau}
        invariants["non_attainment"] = _flag(degeneration.passed)

    report["invariants"] = invariants

    report_path = out / "bubble.json"
    write_json(report_path, report)
    manifest.register(report_path)

    manifest.complete = True
    return _status(invariants)


def _extension_invariants(s: float, random_fields: List[SpectralField], settings: HenonSettings) -> Dict[str, Any]:
    """The extension invariants at one order s."""
    config = settings.problem_config()
    profile = theta_profile(s)
    z_sequence = settings.config["extension"]["z_sequence"]

    isometry = max(
        relative_difference(cylinder_energy(field, profile), hs_norm(field, s) ** 2) for field in random_fields
    )

    try:
        errors = []

        for field in random_fields:
            recovered = neumann_limit(field, profile, z_sequence).coeffs
            exact = frac_laplacian(field, s).coeffs
            errors.append(float(np.max(np.abs(recovered - exact) / np.abs(exact))))

        neumann = max(errors)

    except ExtrapolationUnstable as error:
        logger.warning("Neumann limit at s=%.4g is unstable: %s", s, error)
        neumann = math.nan

    z = np.geomspace(1e-2, 10, 25)

    invariants = {
        "isometry": _bound(isometry, 1e-6),
        "neumann_limit": _bound(neumann, 1e-2),
        "theta_at_zero": _bound(abs(profile.value_at_zero() - 1), 1e-5),
        "ode_residual": _bound(float(np.max(profile.ode_residual(z))), 1e-6),
    }

    if config.N == 1 and 2 * s < 1:
        x = np.array([0.0, 0.5, 1.0, 2.0])
        traces = np.array([poisson_extension_W(point, POISSON_HEIGHT, 1, s) for point in x])
        invariants["poisson_trace"] = _bound(float(np.max(np.abs(traces / bubble_U(x, 1, s) - 1))), 1e-3)

    if s == 0.5:
        z = np.geomspace(1e-4, 10, 50)
        invariants["closed_form_theta"] = _bound(float(np.max(np.abs(profile.theta(z) - np.exp(-z)))), 1e-8)
        invariants["closed_form_ks"] = _bound(abs(ks_constant(s) - 1), 1e-8)

        if config.N == 1:
            # The bubble is constant at N = 2s = 1, and so is its extension.
            values = [poisson_extension_W(x, y, 1, s) for x, y in ((0.0, 0.5), (1.0, 1e-3), (-2.0, 3.0))]
            invariants["closed_form_poisson"] = _bound(float(np.max(np.abs(np.array(values) - 1))), 1e-8)

    return invariants


def cmd_extension_check(settings: HenonSettings, out: Path, manifest: RunManifest) -> int:
    """Check the extension against its closed forms, the isometry, and the Dirichlet-to-Neumann recovery.

    Args:
        settings (HenonSettings): The settings.
        out (Path): The output directory.
        manifest (RunManifest): The manifest of the run.

    Returns:
        int: The exit status; 2 if any invariant fails.
    """
    section = settings.config["extension"]
    basis = make_basis(settings.problem_config())
    rng = np.random.default_rng(section["seed"])

    random_fields = [
        SpectralField(basis, rng.standard_normal(basis.modes) / basis.wavenumbers)
        for _ in range(section["random_fields"])
    ]

    if not random_fields:
        raise ConfigurationError("The extension check needs at least one random field.")

    per_order = {repr(s): _extension_invariants(s, random_fields, settings) for s in section["s_values"]}
    invariants = {
        f"s={order}:{name}": entry for order, entries in per_order.items() for name, entry in entries.items()
    }

    report_path = out / "extension.json"
    write_json(report_path, {"orders": per_order, "ks": {repr(s): ks_constant(s) for s in section["s_values"]}})
    manifest.register(report_path)

    manifest.complete = True
    return _status(invariants)


COMMANDS: Dict[str, Command] = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "identity": cmd_identity,
    "bubble": cmd_bubble,
    "extension-check": cmd_extension_check,
}


def run_command(command: str, config_path: str, out: str) -> int:
    """Run one command, and keep its manifest.

    Args:
        command (str): The command name.
        config_path (str): The settings file.
        out (str): The output directory.

    Returns:
        int: The exit status.
    """
    directory = Path(out)
    directory.mkdir(parents=True, exist_ok=True)

    counter = WarningCounter()
    package_logger = logging.getLogger("henonlab")
    package_logger.addHandler(counter)

    manifest: Optional[RunManifest] = None
    status: Optional[int] = None

    try:
        settings = HenonSettings(config_path)
        manifest = RunManifest(command=command, config=settings.config)
        manifest.write(directory)

        status = COMMANDS[command](settings, directory, manifest)

    except ConfigurationError as error:
        logger.error("Configuration error: %s", error)
        status = EXIT_CONFIGURATION

    except NotConverged as error:
        logger.error("No convergence: %s", error)
        status = EXIT_FAILED

    except NumericalFailure as error:
        logger.error("Numerical failure: %s", error)
        status = EXIT_NUMERICAL

    finally:
        package_logger.removeHandler(counter)

        if manifest is not None:
            manifest.finish(status, counter.count)
            manifest.write(directory)

    logger.info("Command '%s' finished with exit status %d.", command, status)
    return status


def build_parser() -> argparse.ArgumentParser:
    """The argument parser, with one subcommand per command."""
    argument_parser = argparse.ArgumentParser(prog="henonlab", description="Spectral lab for fractional Henon systems.")
    subparsers = argument_parser.add_subparsers(dest="command", required=True)

    for name, command in COMMANDS.items():
        command_parser = subparsers.add_parser(name, help=command.__doc__.splitlines()[0])
        command_parser.add_argument("config", help="the JSON settings file of the run")
        command_parser.add_argument(
            "-o",
            "--out",
            default=".",
            help="the output directory, created if missing",
        )

    return argument_parser


def main(arguments: Optional[Sequence[str]] = None):
    """Parse the command line, run the command, and exit with its status.

    Args:
        arguments (Optional[Sequence[str]], optional): The arguments. Defaults to the process arguments.
    """
    logging.basicConfig(level=logging.INFO)

    logger.info("Starting henonlab, version %s.", henonlab.__version__)

    parsed = build_parser().parse_args(arguments)
    sys.exit(run_command(parsed.command, parsed.config, parsed.out))


if __name__ == "__main__":
    main()
