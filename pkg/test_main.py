"""
End-to-end tests of the command-line subcommands.
"""

import json
import math
from unittest.mock import patch

import pytest

from exceptions import DesignError
from main import load_config, main
from scattering import CSV_HEADER


def write_scenario(tmp_path, payload: dict, name: str = "scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def run(*argv) -> int:
    return main([str(arg) for arg in argv])


FAST_GRID = {"t_end_ns": 300.0, "dt_ns": 0.1}
PLAN_GRID = {"t_end_ns": 450.0, "dt_ns": 0.1}
STORE_AT_8NS = {"events": [{"t_ns": 8.0, "alpha_deg": -90.0, "beta_deg": -90.0}]}


class TestConfig:
    """Test scenario parsing and the error exit codes"""

    def test_defaults(self, tmp_path):
        cfg = load_config(write_scenario(tmp_path, {}))
        assert cfg.sample.xi == 5.0
        assert cfg.grid.dt_ns == pytest.approx(0.05)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"sample": {"xi": 5.0,,}}')
        assert run("simulate", "--config", path, "--out", tmp_path / "out") == 2

    def test_unknown_key(self, tmp_path):
        path = write_scenario(tmp_path, {"sample": {"xi": 5.0, "colour": "blue"}})
        assert run("simulate", "--config", path, "--out", tmp_path / "out") == 2

    def test_missing_file(self, tmp_path):
        assert run("simulate", "--config", tmp_path / "nope.json", "--out", tmp_path / "out") == 2

    def test_nonpositive_xi(self, tmp_path):
        path = write_scenario(tmp_path, {"sample": {"xi": 0.0}})
        assert run("simulate", "--config", path, "--out", tmp_path / "out") == 2

    def test_event_axis_must_be_unit(self, tmp_path):
        events = {"events": [{"t_ns": 8.0, "alpha_deg": -90.0, "beta_deg": -90.0, "field_axis": [0.0, 2.0, 0.0]}]}
        path = write_scenario(tmp_path, {"grid": FAST_GRID, "sequence": events})
        assert run("simulate", "--config", path, "--out", tmp_path / "out") == 2


class TestSimulate:
    """Test the simulate subcommand"""

    def test_unperturbed_run(self, tmp_path):
        path = write_scenario(tmp_path, {"grid": FAST_GRID, "sample": {"xi": 0.01}})
        out = tmp_path / "out"
        assert run("simulate", "--config", path, "--out", out) == 0
        lines = (out / "intensity.csv").read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3002
        summary = json.loads((out / "summary.json").read_text())
        assert summary["converged"]
        assert summary["first_intensity_minimum_ns"] == pytest.approx(8.0, abs=0.1)
        assert summary["first_order_minimum_ns"] == pytest.approx(8.0, abs=0.1)
        assert summary["beat_minima_ns"][0] == pytest.approx(8.0)

    def test_thick_sample_first_order_minimum(self, tmp_path):
        """At xi = 5 the summed intensity dips early while the single-scattering part still dips at 8 ns"""
        path = write_scenario(tmp_path, {"grid": FAST_GRID, "sample": {"xi": 5.0}})
        out = tmp_path / "out"
        assert run("simulate", "--config", path, "--out", out) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["first_order_minimum_ns"] == pytest.approx(8.0, abs=0.1)
        assert summary["first_intensity_minimum_ns"] < summary["first_order_minimum_ns"]

    def test_deterministic(self, tmp_path):
        path = write_scenario(tmp_path, {"grid": FAST_GRID, "sequence": STORE_AT_8NS})
        assert run("simulate", "--config", path, "--out", tmp_path / "a") == 0
        assert run("simulate", "--config", path, "--out", tmp_path / "b") == 0
        for name in ("intensity.csv", "summary.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_residual_report(self, tmp_path):
        """A beam-parallel switch at the first beat minimum suppresses every line"""
        path = write_scenario(tmp_path, {"grid": FAST_GRID, "sequence": STORE_AT_8NS})
        out = tmp_path / "out"
        assert run("simulate", "--config", path, "--out", out) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["switch_times_ns"] == [pytest.approx(8.0)]
        report = summary["residual_report"]
        assert len(report) == 1
        assert report[0]["suppression"] < 1e-9
        assert report[0]["sigma"] <= report[0]["suppression"]

    def test_unordered_events(self, tmp_path):
        events = {"events": [{"t_ns": 40.0}, {"t_ns": 8.0, "alpha_deg": -90.0, "beta_deg": -90.0}]}
        path = write_scenario(tmp_path, {"grid": FAST_GRID, "sequence": events})
        assert run("simulate", "--config", path, "--out", tmp_path / "out") == 2


class TestDesign:
    """Test the design subcommand"""

    def test_four_switch(self, tmp_path):
        path = write_scenario(tmp_path, {"sequence": {"design": {"kind": "four_switch"}}})
        out = tmp_path / "out"
        assert run("design", "--config", path, "--out", out) == 0
        payload = json.loads((out / "sequence.json").read_text())
        times = [e["t_ns"] for e in payload["events"]]
        assert len(times) == 4
        assert times == sorted(times)
        assert times[0] == pytest.approx(8.0, abs=1e-6)
        assert len(payload["residuals"]) == 4
        assert [e["field_axis"] for e in payload["events"]] == [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] * 2

    def test_designed_sequence_replays(self, tmp_path):
        """Feeding the designed events back as explicit events reproduces the design residuals"""
        path = write_scenario(tmp_path, {"sequence": {"design": {"kind": "four_switch"}}})
        assert run("design", "--config", path, "--out", tmp_path / "design") == 0
        payload = json.loads((tmp_path / "design" / "sequence.json").read_text())
        replay = write_scenario(tmp_path, {"grid": FAST_GRID, "sequence": {"events": payload["events"]}}, "replay.json")
        out = tmp_path / "replay"
        assert run("simulate", "--config", replay, "--out", out) == 0
        report = json.loads((out / "summary.json").read_text())["residual_report"]
        assert len(report) == 4
        for entry, design in zip(report, payload["residuals"]):
            assert entry["t_ns"] == pytest.approx(design["t_ns"], abs=1e-9)
            assert entry[design["target"]] == pytest.approx(design["residual"], abs=1e-6)

    def test_no_switch_in_window(self, tmp_path):
        design = {"kind": "release", "target": "pi", "rotation": "back_to_z", "window_ns": [8.0, 8.15]}
        path = write_scenario(tmp_path, {"sequence": {**STORE_AT_8NS, "design": design}})
        assert run("design", "--config", path, "--out", tmp_path / "out") == 3

    def test_release_design(self, tmp_path):
        design = {"kind": "release", "target": "pi", "rotation": "back_to_z", "window_ns": [8.0, 80.0]}
        path = write_scenario(tmp_path, {"sequence": {**STORE_AT_8NS, "design": design}})
        out = tmp_path / "out"
        assert run("design", "--config", path, "--out", out) == 0
        payload = json.loads((out / "sequence.json").read_text())
        assert len(payload["events"]) == 2
        assert payload["events"][1]["t_ns"] == pytest.approx(46.0, abs=1.0)
        assert payload["residuals"][0]["target"] == "pi"

    def test_release_needs_target(self, tmp_path):
        path = write_scenario(tmp_path, {"sequence": {"design": {"kind": "release"}}})
        assert run("design", "--config", path, "--out", tmp_path / "out") == 2

    def test_design_block_required(self, tmp_path):
        path = write_scenario(tmp_path, {})
        assert run("design", "--config", path, "--out", tmp_path / "out") == 2


class TestScan:
    """Test the xi scan"""

    def test_one_directory_per_value(self, tmp_path):
        path = write_scenario(tmp_path, {"grid": {"t_end_ns": 100.0, "dt_ns": 0.1},
                                         "scan": {"xi_values": [0.5, 2.0, 5.0]}})
        out = tmp_path / "out"
        assert run("scan", "--config", path, "--out", out) == 0
        for name in ("xi_0.5", "xi_2", "xi_5"):
            summary = json.loads((out / name / "summary.json").read_text())
            assert (out / name / "intensity.csv").exists()
            assert summary["xi"] == pytest.approx(float(name[3:]))

    def test_empty_scan(self, tmp_path):
        path = write_scenario(tmp_path, {})
        assert run("scan", "--config", path, "--out", tmp_path / "out") == 2

    def test_failed_point_propagates(self, tmp_path):
        path = write_scenario(tmp_path, {"scan": {"xi_values": [1.0]}})
        with patch("main.run_simulation", side_effect=DesignError("no switching time")):
            assert run("scan", "--config", path, "--out", tmp_path / "out") == 3


class TestEntangle:
    """Test the two-mode state and Bell scan"""

    def test_four_switch_entanglement(self, tmp_path):
        path = write_scenario(tmp_path, {"grid": PLAN_GRID, "sequence": {"design": {"kind": "four_switch"}}})
        out = tmp_path / "out"
        assert run("entangle", "--config", path, "--out", out) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["alpha_abs2"] + summary["beta_abs2"] == pytest.approx(1.0, abs=1e-12)
        assert summary["alpha_abs2"] > 0.05 and summary["beta_abs2"] > 0.05
        assert 0.0 < summary["visibility"] <= 1.0
        assert summary["S"] == pytest.approx(2 * math.sqrt(2) * summary["visibility"], rel=1e-9)
        assert 0.0 <= summary["loss_fraction"] <= 1.0
        assert summary["pi_window_ns"][1] <= summary["sigma_window_ns"][0]
        last = (out / "bell_scan.csv").read_text().splitlines()[-1]
        assert last.startswith("# S=") and last.endswith("classical_bound=2")

    def test_record_must_outlast_plan(self, tmp_path):
        """The default sigma window needs samples after the last release"""
        path = write_scenario(tmp_path, {"grid": FAST_GRID, "sequence": {"design": {"kind": "four_switch"}}})
        assert run("entangle", "--config", path, "--out", tmp_path / "out") == 2

    def test_no_photon(self, tmp_path):
        payload = {
            "grid": FAST_GRID,
            "geometry": {"incident_polarization": [0.0, 0.0, 0.0]},
            "windows": {"pi_window_ns": [10.0, 50.0], "sigma_window_ns": [60.0, 200.0]},
        }
        path = write_scenario(tmp_path, payload)
        assert run("entangle", "--config", path, "--out", tmp_path / "out") == 4

    def test_windows_required_without_plan(self, tmp_path):
        path = write_scenario(tmp_path, {"grid": FAST_GRID})
        assert run("entangle", "--config", path, "--out", tmp_path / "out") == 2
