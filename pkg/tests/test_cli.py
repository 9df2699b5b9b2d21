import copy
import json
import math
import pathlib
import subprocess
import sys

import pytest

from golden_configs import GOLDEN_CONFIGS

from ambientflow.cli import (ConfigError, load_config, main, make_curve,
                             run_scenario)

GOLDEN_DIR = pathlib.Path(__file__).parent / "golden"


def run_cli(*args):
    proc = subprocess.run([sys.executable, "-m", "ambientflow.cli", *args],
                          capture_output=True, text=True)
    return proc


class TestConfigParsing:
    def test_toml_and_json_equivalent(self, tmp_path):
        toml_path = tmp_path / "c.toml"
        toml_path.write_text(
            'scenario = "constants"\n'
            '[params]\nsigma1 = 1.0\nsigma2 = 0.0\n'
            '[scenario_options]\nc2 = 8.0\n')
        json_path = tmp_path / "c.json"
        json_path.write_text(json.dumps({
            "scenario": "constants",
            "params": {"sigma1": 1.0, "sigma2": 0.0},
            "scenario_options": {"c2": 8.0}}))
        a = load_config(toml_path)
        b = load_config(json_path)
        assert a["scenario"] == b["scenario"] == "constants"
        assert a["scenario_options"]["c2"] == b["scenario_options"]["c2"]

    def test_curve_from_file(self, tmp_path):
        from ambientflow.geometry import ClosedCurve
        src = ClosedCurve.circle(1.0, 32)
        path = tmp_path / "curve.csv"
        src.to_csv(path)
        curve = make_curve({"kind": "file", "path": str(path)})
        assert len(curve) == 32

    def test_unknown_scenario(self, tmp_path):
        with pytest.raises(ConfigError):
            run_scenario({"scenario": "nope"}, outdir=tmp_path)

    def test_unknown_curve_kind(self):
        with pytest.raises(ConfigError):
            make_curve({"kind": "heptagram"})


class TestScenarioOutputs:
    def test_constants_scenario_k_value(self, tmp_path):
        manifest = run_scenario(copy.deepcopy(GOLDEN_CONFIGS["constants"]),
                                outdir=tmp_path)
        assert abs(manifest["headline"]["K"] - 2.0) <= 1e-9
        data = json.loads((tmp_path / "constants.json").read_text())
        assert data["K"] == 2.0

    def test_baseline_files_exist(self, tmp_path):
        manifest = run_scenario(copy.deepcopy(GOLDEN_CONFIGS["baseline-circle"]),
                                outdir=tmp_path)
        for name in ("manifest.json", "series.csv", "trajectory.json", "curves.svg"):
            assert (tmp_path / name).exists()
        first = (tmp_path / "series.csv").read_text().splitlines()[0]
        assert first == "t,L,A,W,kmin,kmax,Fmin"
        assert manifest["verdicts"]["winding_conserved"]

    def test_byte_identical_reruns(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_scenario(copy.deepcopy(GOLDEN_CONFIGS["baseline-circle"]), outdir=out1)
        run_scenario(copy.deepcopy(GOLDEN_CONFIGS["baseline-circle"]), outdir=out2)
        for name in ("manifest.json", "series.csv", "curves.svg"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name

    @pytest.mark.parametrize("name", sorted(GOLDEN_CONFIGS))
    def test_golden_manifest(self, name, tmp_path):
        golden = GOLDEN_DIR / f"{name}.manifest.json"
        run_scenario(copy.deepcopy(GOLDEN_CONFIGS[name]), outdir=tmp_path)
        got = (tmp_path / "manifest.json").read_bytes()
        assert got == golden.read_bytes(), f"golden mismatch for {name}"


class TestCommandLine:
    def test_run_and_strict_pass(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(GOLDEN_CONFIGS["baseline-circle"]))
        proc = run_cli("run", str(cfg), "--out", str(tmp_path / "out"), "--strict")
        assert proc.returncode == 0, proc.stderr

    def test_bad_config_is_usage_error(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("scenario = \"baseline-circle\"\n")  # no curve section
        proc = run_cli("run", str(cfg), "--out", str(tmp_path / "out"))
        assert proc.returncode == 2

    def test_unparseable_config(self, tmp_path):
        cfg = tmp_path / "bad.toml"
        cfg.write_text("= nonsense ==")
        proc = run_cli("run", str(cfg), "--out", str(tmp_path / "out"))
        assert proc.returncode == 2

    def test_strict_failure_is_nonzero(self, tmp_path):
        config = copy.deepcopy(GOLDEN_CONFIGS["killing-equivalence"])
        config["scenario_options"]["hausdorff_tol"] = 1e-12
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(config))
        proc = run_cli("run", str(cfg), "--out", str(tmp_path / "out"), "--strict")
        assert proc.returncode == 1

    def test_constants_subcommand(self):
        proc = run_cli("constants", "--sigma1", "1", "--sigma2", "0",
                       "--c1", "0", "--c2", "8")
        assert proc.returncode == 0
        data = json.loads(proc.stdout)
        assert data["K"] == 2.0

    def test_constants_case_c(self):
        proc = run_cli("constants", "--case", "c", "--x-t0", "1.0")
        assert proc.returncode == 0
        data = json.loads(proc.stdout)
        assert abs(data["M"] - math.pi) <= 1e-12
        proc = run_cli("constants", "--case", "c")
        assert proc.returncode == 2

    def test_verify_and_rescale_subcommands(self, tmp_path):
        out = tmp_path / "out"
        run_scenario(copy.deepcopy(GOLDEN_CONFIGS["baseline-circle"]), outdir=out)
        proc = run_cli("verify", str(out), "--strict")
        assert proc.returncode == 0, proc.stderr
        assert (out / "verify.json").exists()
        proc = run_cli("rescale", str(out))
        assert proc.returncode == 0, proc.stderr
        assert (out / "rescaled.csv").exists()
        assert (out / "roundness.csv").exists()

    def test_rescale_requires_extinct_run(self, tmp_path):
        config = copy.deepcopy(GOLDEN_CONFIGS["baseline-circle"])
        config["control"] = {"max_time": 0.01, "snapshot_every": 100}
        out = tmp_path / "out"
        run_scenario(config, outdir=out)
        proc = run_cli("rescale", str(out))
        assert proc.returncode == 2


class TestThreadCap:
    def test_env_var_parallel_sweep(self, tmp_path, monkeypatch):
        monkeypatch.setenv("AMBIENTFLOW_THREADS", "2")
        manifest = run_scenario(copy.deepcopy(GOLDEN_CONFIGS["loss-of-convexity"]),
                                outdir=tmp_path)
        assert manifest["verdicts"]["all_events_recorded"]
        assert manifest["verdicts"]["event_times_non_increasing"]
