"""This module contains a class that handles settings for henonlab runs.

A run is configured by a single JSON document, which is loaded with the YAML loader (JSON is a subset of YAML).
Every section has documented defaults; only `problem.s` is required.
"""
import copy
import logging
import os
from dataclasses import asdict
from typing import Any, Dict

import yaml

from henonlab.helper.errors import ConfigurationError

# A logger for this module
logger = logging.getLogger(__name__)

# The environment variable that caps sweep parallelism.
THREADS_VARIABLE = "HENON_THREADS"

REQUIRED = object()

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "problem": {"N": 1, "s": REQUIRED, "alpha": 0.0, "modes": 64, "grid": None},
    "exponents": {"p": 2.0, "q": 2.0},
    "solver": {},
    "sweep": {
        "q": 2.0,
        "p_values": [2.0, 2.1, 2.2, 2.3, 2.4, 2.5, 2.6, 2.7, 2.8, 2.9],
        "warm_start": False,
    },
    "identity": {"pairs": [[2.0, 2.0], [2.5, 1.5], [3.0, 1.5]], "alpha_values": [0.0, 1.0]},
    "bubble": {"eps0": 1e-2, "halvings": 4, "degeneration_modes": [128, 256, 512], "seed": 0},
    "extension": {
        "s_values": [0.5, 0.3],
        "random_fields": 20,
        "seed": 0,
        "z_sequence": [1e-2, 5e-3, 2.5e-3],
    },
}


def worker_count() -> int:
    """The number of sweep workers: HENON_THREADS if set, else the number of CPUs.

    Raises:
        ConfigurationError: If HENON_THREADS is not a positive integer.

    Returns:
        int: The number of workers.
    """
    value = os.environ.get(THREADS_VARIABLE)

    if value is None:
        return os.cpu_count() or 1

    try:
        count = int(value)

    except ValueError as error:
        raise ConfigurationError(f"{THREADS_VARIABLE}={value!r} is not an integer.") from error

    if count < 1:
        raise ConfigurationError(f"{THREADS_VARIABLE}={count} must be positive.")

    return count


def _coerce(value: Any, default: Any, key: str) -> Any:
    """Convert a setting to the type of its default.

    The YAML loader reads JSON numbers like 1e-2 as text, so numbers are converted explicitly.

    Args:
        value (Any): The loaded value.
        default (Any): The default value.
        key (str): The dotted key, for error messages.

    Raises:
        ConfigurationError: If the value cannot be converted.

    Returns:
        Any: The converted value.
    """
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError("expected true or false")

            return value

        if isinstance(default, int) or (default is None and key == "problem.grid"):
            if value is None:
                return None

            if isinstance(value, bool) or float(value) != int(float(value)):
                raise TypeError("expected an integer")

            return int(float(value))

        if isinstance(default, float) or default is REQUIRED:
            if isinstance(value, bool):
                raise TypeError("expected a number")

            return float(value)

        if isinstance(default, list):
            if not isinstance(value, list):
                raise TypeError("expected a list")

            reference = default[0] if default else 0.0
            return [_coerce(item, reference, key) for item in value]

    except (TypeError, ValueError) as error:
        logger.error("Setting '%s' has an invalid value %r.", key, value)
        raise ConfigurationError(f"Setting '{key}' has an invalid value {value!r}: {error}.") from error

    return value


class HenonSettings:
    """This class holds and manages the settings of a henonlab run."""

    def __init__(self, config_path: str):
        """Load a settings document from a path, and resolve defaults.

        Args:
            config_path (str): The path of the settings file.

        Raises:
            ConfigurationError: If the file is missing, unreadable, or its content is invalid.
        """
        try:
            # Open settings file, in order to configure the run
            with open(config_path, "r", encoding="utf8") as settings_file:
                document = yaml.safe_load(settings_file)
                logger.info("Settings file %s was loaded.", config_path)

        except FileNotFoundError as error:
            logger.error("Settings file not found at %s. Aborting.", config_path)
            raise ConfigurationError(f"Settings file not found at {config_path}.") from error

        except yaml.YAMLError as error:
            logger.error("Settings file %s cannot be parsed.", config_path)
            raise ConfigurationError(f"Settings file {config_path} cannot be parsed: {error}") from error

        self.config_path = config_path
        self.config = self.resolve(document)

    @staticmethod
    def resolve(document: Any) -> Dict[str, Dict[str, Any]]:
        """Merge a settings document with the defaults.

        Args:
            document (Any): The loaded document.

        Raises:
            ConfigurationError: For unknown sections or keys, invalid values, or a missing 'problem.s'.

        Returns:
            Dict[str, Dict[str, Any]]: The resolved settings.
        """
        from henonlab.optimization.solver import SolverOptions

        if document is None:
            document = {}

        if not isinstance(document, dict):
            raise ConfigurationError("The settings document must be a key-value mapping.")

        defaults = copy.deepcopy(DEFAULTS, {id(REQUIRED): REQUIRED})
        defaults["solver"] = asdict(SolverOptions())

        unknown = set(document) - set(defaults)

        if unknown:
            raise ConfigurationError(f"Unknown settings sections: {sorted(unknown)}.")

        resolved: Dict[str, Dict[str, Any]] = {}

        for section, section_defaults in defaults.items():
            values = document.get(section) or {}

            if not isinstance(values, dict):
                raise ConfigurationError(f"Settings section '{section}' must be a key-value mapping.")

            unknown = set(values) - set(section_defaults)

            if unknown:
                raise ConfigurationError(f"Unknown settings in section '{section}': {sorted(unknown)}.")

            resolved[section] = {}

            for key, default in section_defaults.items():
                dotted = f"{section}.{key}"

                if key not in values:
                    if default is REQUIRED:
                        logger.error("Required setting '%s' is missing.", dotted)
                        raise ConfigurationError(f"Required setting '{dotted}' is missing.")

                    resolved[section][key] = default

                else:
                    resolved[section][key] = _coerce(values[key], default, dotted)

        return resolved

    def problem_config(self):
        """The problem configuration.

        Returns:
            ProblemConfig: Built from the 'problem' section.
        """
        from henonlab.spectral.core import ProblemConfig

        return ProblemConfig(**self.config["problem"])

    def exponent_config(self):
        """The exponents of single solves.

        Returns:
            ExponentConfig: Built from the 'exponents' section.
        """
        from henonlab.spectral.energy import ExponentConfig

        section = self.config["exponents"]
        return ExponentConfig(section["p"], section["q"], self.problem_config().crit_exp)

    def solver_options(self):
        """The solver options.

        Returns:
            SolverOptions: Built from the 'solver' section.
        """
        from henonlab.optimization.solver import SolverOptions

        return SolverOptions(**self.config["solver"])

    def sweep_plan(self):
        """The exponent sweep.

        Returns:
            SweepPlan: Built from the 'sweep', 'problem' and 'solver' sections.
        """
        from henonlab.analysis.asymptotics import SweepPlan

        section = self.config["sweep"]
        return SweepPlan(
            q=section["q"],
            p_values=tuple(section["p_values"]),
            config=self.problem_config(),
            options=self.solver_options(),
            warm_start=section["warm_start"],
        )
