import json
import math

import numpy as np
import pandas as pd
import pytest

from artifacts_manager import (
    TOOL_NAME,
    ArtifactsManager,
    _clean,
    canonical_json,
    frame_to_csv,
    manifest_hash,
    plot_frame,
)


@pytest.fixture
def manager(tmp_path):
    return ArtifactsManager(str(tmp_path / "runs"))


def test_clean_handles_numpy_and_non_finite():
    out = _clean({"a": np.float64(1.5), "b": [math.inf, -math.inf, math.nan], "c": np.int64(3),
                  "d": np.array([1.0, 2.0]), "e": np.bool_(True), 1: (2, 3)})
    assert out == {"a": 1.5, "b": ["inf", "-inf", "nan"], "c": 3, "d": [1.0, 2.0], "e": True, "1": [2, 3]}
    assert json.loads(json.dumps(out)) == out


def test_manifest_hash_ignores_key_order():
    a = {"x": 1, "y": {"b": 2.0, "a": [1, 2]}}
    b = {"y": {"a": [1, 2], "b": 2.0}, "x": 1}
    assert canonical_json(a) == canonical_json(b)
    assert manifest_hash(a) == manifest_hash(b)
    assert len(manifest_hash(a)) == 64
    assert manifest_hash(a) != manifest_hash({"x": 2})


def test_csv_round_trips_floats_exactly():
    df = pd.DataFrame({"t": [0.1, 1.0 / 3.0], "v": [1e-300, -2.5]})
    text = frame_to_csv(df)
    assert text.splitlines()[0] == "t,v"
    assert "\r" not in text
    assert text.endswith("\n")
    assert float(text.splitlines()[2].split(",")[0]) == 1.0 / 3.0


def test_run_folder_is_named_by_hash(manager):
    h = manifest_hash({"config": "a"})
    run_dir = manager.create_run("stefan", h)
    assert run_dir.name == f"stefan_{h[:8]}"
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["tool"] == TOOL_NAME
    assert manifest["config_hash"] == h
    assert manifest["artifacts"] == {}


def test_tables_register_in_manifest(manager):
    run_dir = manager.create_run("r", "0" * 64)
    df = pd.DataFrame({"m": [0, 1], "t": [0.0, 0.5], "u_1": [1.0, 0.5]})
    manager.save_trajectory(df)
    manager.save_nodal(pd.DataFrame({"x": [0.25], "u": [1.0]}), 16)
    manager.save_study("eps", pd.DataFrame({"eps": [0.1]}))
    manager.save_json("diagnostics", {"max": math.inf})
    manager.update_manifest(status="ok")

    assert (run_dir / "nodal_m000016.csv").exists()
    manifest = json.loads((run_dir / "manifest.json").read_text())
    assert manifest["artifacts"] == {
        "trajectory": "trajectory.csv",
        "nodal_16": "nodal_m000016.csv",
        "study_eps": "study_eps.csv",
        "diagnostics": "diagnostics.json",
    }
    assert manifest["status"] == "ok"
    assert json.loads((run_dir / "diagnostics.json").read_text()) == {"max": "inf"}
    assert pd.read_csv(run_dir / "trajectory.csv").equals(df)
    assert not list(run_dir.glob(".*.tmp"))


def test_report_and_listing(manager):
    manager.create_run("r", "ab" * 32)
    manager.update_manifest(status="invalid", constants={"c_V": 0.3},
                            violations=[{"severity": "error", "code": "q_range", "message": "q must exceed 2"}])
    report = manager.generate_report()
    assert "## Run: r" in report
    assert "[error] q_range" in report
    assert "- **c_V**: 0.3" in report
    assert (manager.current_run_dir / "report.md").read_text() == report

    runs = manager.list_runs()
    assert [r["status"] for r in runs] == ["invalid"]
    assert runs[0]["name"] == "r_abababab"


def test_requires_active_run(manager):
    with pytest.raises(ValueError):
        manager.save_trajectory(pd.DataFrame())


def test_plot_frame_is_long():
    df = pd.DataFrame({"m": [0, 1], "t": [0.0, 1.0], "u_1": [1.0, 2.0], "z_1": [3.0, 4.0]})
    long = plot_frame(df)
    assert list(long.columns) == ["t", "series", "value"]
    assert len(long) == 4
    assert set(long["series"]) == {"u_1", "z_1"}
