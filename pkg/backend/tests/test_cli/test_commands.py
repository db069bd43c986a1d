"""
End-to-end tests of the command-line front end
"""
import json
from pathlib import Path

import pandas as pd
import pytest

from app.core.exceptions import SolverError
from app.main import main

CONFIG = """\
seed: 5
paths:
  output_dir: {out}
simulation:
  start: '2021-01-04'
  end: '2023-06-30'
  n_events: 30
  min_gap_days: 12
  event_window: [-5, 5]
threshold:
  n_bootstrap: 20
giv:
  n_eta_bootstrap: 20
placebo:
  n_draws: 10
  n_dates: 20
gbr:
  n_trees: 50
"""


def write_config(directory: Path) -> Path:
    path = directory / "run.yaml"
    path.write_text(CONFIG.format(out=(directory / "out").as_posix()), encoding="utf-8")
    return path


def read_json(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    """Configuration whose output directory already holds a structural simulation"""
    root = tmp_path_factory.mktemp("run")
    config = write_config(root)
    assert main(["--config", str(config), "simulate"]) == 0
    return config, root / "out"


@pytest.mark.integration
class TestSimulate:
    """Test the simulate command"""

    def test_writes_inputs_and_manifest(self, simulated):
        """Test panel, events, weights, holdings and ground truth are listed"""
        _, out = simulated
        manifest = read_json(out / "simulate" / "manifest.json")
        assert manifest["command"] == "simulate"
        assert manifest["seed"] == 5
        names = {entry["path"] for entry in manifest["files"]}
        assert names == {"panel.csv", "events.csv", "weights.csv", "holdings.csv",
                         "ground_truth.txt"}

    def test_deterministic(self, tmp_path):
        """Test two runs with one seed produce identical manifests"""
        config = write_config(tmp_path)
        assert main(["--config", str(config), "--out", str(tmp_path / "a"), "simulate"]) == 0
        assert main(["--config", str(config), "--out", str(tmp_path / "b"), "simulate"]) == 0
        first = (tmp_path / "a" / "simulate" / "manifest.json").read_text(encoding="utf-8")
        second = (tmp_path / "b" / "simulate" / "manifest.json").read_text(encoding="utf-8")
        assert first == second

    def test_seed_flag_changes_output(self, tmp_path):
        """Test a different seed changes the panel"""
        config = write_config(tmp_path)
        main(["--config", str(config), "--out", str(tmp_path / "a"), "simulate"])
        main(["--config", str(config), "--seed", "6", "--out", str(tmp_path / "b"), "simulate"])
        a = read_json(tmp_path / "a" / "simulate" / "manifest.json")
        b = read_json(tmp_path / "b" / "simulate" / "manifest.json")
        assert a["files"] != b["files"]

    def test_scenario(self, tmp_path):
        """Test a known-truth scenario records its truth"""
        config = write_config(tmp_path)
        assert main(["--config", str(config), "simulate", "--scenario", "did"]) == 0
        truth = (tmp_path / "out" / "simulate" / "ground_truth.txt").read_text(encoding="utf-8")
        assert "did.effect = -5.0" in truth
        assert "scenario = did" in truth

    def test_no_events(self, tmp_path):
        """Test an empty catalog simulates but cannot be estimated"""
        config = write_config(tmp_path)
        assert main(["--config", str(config), "simulate", "--n-events", "0"]) == 0
        events = pd.read_csv(tmp_path / "out" / "simulate" / "events.csv")
        assert len(events) == 0
        assert main(["--config", str(config), "estimate", "event-study"]) == 3


@pytest.mark.integration
class TestEstimate:
    """Test the estimate command on a simulated run"""

    def test_event_study(self, simulated):
        """Test one row per window day and the diagnostic tables"""
        config, out = simulated
        assert main(["--config", str(config), "estimate", "event-study"]) == 0
        folder = out / "estimate_event_study"
        table = pd.read_csv(folder / "event_study.csv")
        assert list(table["k"]) == list(range(-5, 4))
        summary = read_json(folder / "event_study.json")
        assert summary["se_flavor"] == "cluster(event)"
        assert (folder / "se_comparison.csv").exists()
        listed = {e["path"] for e in read_json(folder / "manifest.json")["files"]}
        assert {"event_study.csv", "event_study.json", "notes.json"} <= listed

    def test_threshold_bootstrap_flag(self, simulated):
        """Test --bootstrap overrides the configured replications"""
        config, out = simulated
        assert main(["--config", str(config), "estimate", "threshold", "--bootstrap", "5"]) == 0
        summary = read_json(out / "estimate_threshold" / "threshold.json")
        assert summary["n_bootstrap"] == 5
        assert summary["ci_low"] <= summary["gamma_hat"] <= summary["ci_high"]

    def test_giv(self, simulated):
        """Test the instrumented multiplier and its eta table"""
        config, out = simulated
        assert main(["--config", str(config), "estimate", "giv", "--bootstrap", "0"]) == 0
        folder = out / "estimate_giv"
        summary = read_json(folder / "giv.json")
        assert summary["n_events"] > 0
        assert "multiplier_bps_per_100m" in summary
        assert len(pd.read_csv(folder / "eta_recovery.csv")) == 6
        assert not (folder / "eta_bootstrap.csv").exists()

    @pytest.mark.parametrize(
        "which,files",
        [
            ("lp", {"lp_irf.csv", "lp.json"}),
            ("did", {"did.csv", "did.json", "did_by_control.csv"}),
            ("monthly", {"monthly_panel.csv", "monthly.json", "holdings_regression.csv",
                         "holdings_welch.csv"}),
            ("gbr", {"gbr_importance.csv", "gbr_partial_gas.csv", "gbr.json"}),
        ],
    )
    def test_other_estimators(self, simulated, which, files):
        """Test each estimator writes its tables"""
        config, out = simulated
        assert main(["--config", str(config), "estimate", which]) == 0
        folder = out / f"estimate_{which}"
        listed = {e["path"] for e in read_json(folder / "manifest.json")["files"]}
        assert files <= listed

    def test_missing_inputs(self, tmp_path):
        """Test estimating before simulating is a configuration error"""
        config = write_config(tmp_path)
        assert main(["--config", str(config), "estimate", "lp"]) == 2


@pytest.mark.integration
class TestPlaceboCommand:
    """Test the placebo command"""

    def test_draws_flag(self, simulated):
        """Test --draws overrides the configured count"""
        config, out = simulated
        assert main(["--config", str(config), "placebo", "--draws", "3"]) == 0
        summary = read_json(out / "placebo" / "placebo.json")
        assert summary["n_draws"] == 3
        assert set(summary["p_values"]) == {"k-5", "k-4", "k-3", "k-2", "k+0", "k+1", "k+2",
                                            "k+3"}


@pytest.mark.integration
class TestCalibrateAndReport:
    """Test calibration and the Markdown report"""

    def test_calibrate_baseline(self, tmp_path):
        """Test the default calibration reproduces the reference eta table"""
        config = write_config(tmp_path)
        assert main(["--config", str(config), "calibrate"]) == 0
        summary = read_json(tmp_path / "out" / "calibrate" / "calibration.json")
        assert summary["eta_baseline"] == pytest.approx(3.73, abs=0.006)
        assert summary["max_deviation_from_reference"] <= 0.006
        assert summary["regime"] in {"interior", "corner", "saturated"}
        assert (tmp_path / "out" / "calibrate" / "psi_sweep.csv").exists()

    def test_report_lists_results(self, tmp_path):
        """Test the report includes every result JSON"""
        config = write_config(tmp_path)
        main(["--config", str(config), "calibrate"])
        assert main(["--config", str(config), "report"]) == 0
        text = (tmp_path / "out" / "report" / "report.md").read_text(encoding="utf-8")
        assert "## calibrate/calibration.json" in text

    def test_report_schema(self, tmp_path):
        """Test --schema publishes the configuration schema"""
        config = write_config(tmp_path)
        assert main(["--config", str(config), "report", "--schema"]) == 0
        schema = read_json(tmp_path / "out" / "report" / "config_schema.json")
        assert "simulation" in schema["properties"]

    def test_bad_config(self, tmp_path):
        """Test invalid configuration exit code"""
        path = tmp_path / "bad.yaml"
        path.write_text("seed: many\n", encoding="utf-8")
        assert main(["--config", str(path), "calibrate"]) == 2

    def test_solver_failure_exit_code(self, tmp_path, mocker):
        """Test an estimation failure maps to exit code 4"""
        config = write_config(tmp_path)
        mocker.patch(
            "app.cli.commands.calibrate.RobustPortfolioSolver.solve",
            side_effect=SolverError("no root in bracket", {"psi_amb": 1.5}),
        )
        assert main(["--config", str(config), "calibrate"]) == 4

    def test_corner_search_failure_is_recorded(self, tmp_path, mocker):
        """Test a missing exit corner leaves corner_psi empty"""
        config = write_config(tmp_path)
        mocker.patch(
            "app.cli.commands.calibrate.RobustPortfolioSolver.corner_threshold",
            side_effect=SolverError("no corner regime found"),
        )
        assert main(["--config", str(config), "calibrate"]) == 0
        summary = read_json(tmp_path / "out" / "calibrate" / "calibration.json")
        assert summary["corner_psi"] is None
