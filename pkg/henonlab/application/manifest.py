"""This module persists the results of a run: CSV tables, JSON reports and the run manifest.

The manifest records the tool version, the resolved settings, timestamps, the exit status and a digest of every file
the run wrote. It is written before the first result and rewritten when the run ends, so that an interrupted run leaves
a manifest that marks its outputs incomplete.
"""
import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import henonlab
from henonlab.helper.conversion import to_builtin, to_text

# A logger for this module
logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def timestamp() -> str:
    """The current UTC time, in ISO 8601 format."""
    return datetime.now(timezone.utc).isoformat()


def file_digest(path: Path) -> str:
    """The SHA-256 digest of a file's content.

    Args:
        path (Path): The file.

    Returns:
        str: The hexadecimal digest.
    """
    digest = hashlib.sha256()

    with open(path, "rb") as content:
        for chunk in iter(lambda: content.read(1 << 16), b""):
            digest.update(chunk)

    return digest.hexdigest()


class WarningCounter(logging.Handler):
    """A logging handler that counts warnings, for the manifest."""

    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.count = 0

    def emit(self, record: logging.LogRecord) -> None:
        self.count += 1


@dataclass
class RunManifest:
    """The record of one command run."""

    command: str
    config: Dict[str, Any]
    version: str = henonlab.__version__
    started: str = field(default_factory=timestamp)
    finished: Optional[str] = None
    exit_status: Optional[int] = None

    # True once every output of the command was written.
    complete: bool = False

    warnings: int = 0

    # Output file names, relative to the output directory, mapped to their SHA-256 digests.
    files: Dict[str, str] = field(default_factory=dict)

    def register(self, path: Path) -> None:
        """Add a written file to the inventory.

        Args:
            path (Path): The file, inside the output directory.
        """
        self.files[path.name] = file_digest(path)
        logger.info("Wrote %s.", path)

    def finish(self, exit_status: int, warnings: int) -> None:
        """Mark the run as ended.

        Args:
            exit_status (int): The exit status of the command.
            warnings (int): The number of warnings logged during the run.
        """
        self.finished = timestamp()
        self.exit_status = exit_status
        self.warnings = warnings

    def write(self, directory: Path) -> Path:
        """Write the manifest into an output directory.

        Args:
            directory (Path): The output directory.

        Returns:
            Path: The manifest file.
        """
        path = directory / MANIFEST_NAME
        write_json(path, asdict(self))
        return path

    @classmethod
    def load(cls, path: Path) -> "RunManifest":
        """Read a manifest file.

        Args:
            path (Path): The manifest file.

        Returns:
            RunManifest: The manifest.
        """
        with open(path, "r", encoding="utf8") as manifest_file:
            return cls(**json.load(manifest_file))

    def verify(self, directory: Path) -> List[str]:
        """Recompute the digests of the inventory.

        Args:
            directory (Path): The output directory.

        Returns:
            List[str]: The names of missing files, or files whose content changed.
        """
        mismatches = []

        for name, digest in self.files.items():
            path = directory / name

            if not path.is_file() or file_digest(path) != digest:
                mismatches.append(name)

        return mismatches


def write_json(path: Path, content: Any) -> None:
    """Write a JSON document with sorted keys, converting numpy types first.

    Args:
        path (Path): The target file.
        content (Any): The document.
    """
    with open(path, "w", encoding="utf8", newline="\n") as json_file:
        json.dump(to_builtin(content), json_file, indent=2, sort_keys=True)
        json_file.write("\n")


def write_csv(path: Path, columns: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    """Write a table with shortest round-trip numbers, lower-case flags and LF line endings.

    Args:
        path (Path): The target file.
        columns (Sequence[str]): The header.
        rows (Sequence[Sequence[Any]]): The rows, each as long as the header.
    """
    with open(path, "w", encoding="utf8", newline="") as csv_file:
        writer = csv.writer(csv_file, lineterminator="\n")
        writer.writerow(columns)

        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"A row has {len(row)} values, but the table has {len(columns)} columns.")

            writer.writerow([to_text(value) for value in row])
