"""Test the run manifest and the result writers."""
import json
import logging

import numpy as np
import pytest

import henonlab
from henonlab.application.manifest import MANIFEST_NAME, RunManifest, WarningCounter, write_csv, write_json


def test_write_csv(tmp_path):
    """Tables use shortest round-trip numbers, lower-case flags and LF line endings."""
    path = tmp_path / "table.csv"
    write_csv(path, ["p_eps", "M1", "converged"], [[2.5, np.float64(0.1), True], [2.6, float("nan"), False]])

    assert path.read_bytes() == b"p_eps,M1,converged\n2.5,0.1,true\n2.6,nan,false\n"

    with pytest.raises(ValueError):
        write_csv(path, ["p_eps", "M1"], [[2.5]])


def test_write_json(tmp_path):
    """Documents are indented, sorted, and free of numpy types."""
    path = tmp_path / "report.json"
    write_json(path, {"b": np.int64(3), "a": np.array([0.5, 1.0])})

    text = path.read_text(encoding="utf8")

    assert json.loads(text) == {"a": [0.5, 1.0], "b": 3}
    assert text.index('"a"') < text.index('"b"')
    assert text.endswith("}\n")


def test_manifest_round_trip(tmp_path):
    """A written manifest loads back, and its inventory verifies."""
    output = tmp_path / "solution.csv"
    output.write_text("k,u,v\n", encoding="utf8")

    manifest = RunManifest(command="solve", config={"problem": {"s": 0.3}})
    manifest.register(output)
    manifest.complete = True
    manifest.finish(0, 2)
    path = manifest.write(tmp_path)

    assert path.name == MANIFEST_NAME

    loaded = RunManifest.load(path)

    assert loaded == manifest
    assert loaded.version == henonlab.__version__
    assert loaded.exit_status == 0 and loaded.warnings == 2
    assert loaded.finished is not None
    assert loaded.verify(tmp_path) == []

    output.write_text("k,u,v\n1,0,0\n", encoding="utf8")
    assert loaded.verify(tmp_path) == ["solution.csv"]

    output.unlink()
    assert loaded.verify(tmp_path) == ["solution.csv"]


def test_warning_counter():
    """Only warnings and errors are counted."""
    counter = WarningCounter()
    test_logger = logging.getLogger("henonlab.tests.counter")
    test_logger.addHandler(counter)

    try:
        test_logger.info("Not counted.")
        test_logger.warning("Counted.")
        test_logger.error("Counted.")

    finally:
        test_logger.removeHandler(counter)

    assert counter.count == 2
