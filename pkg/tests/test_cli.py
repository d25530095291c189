"""Tests for the command-line front end: config layering, exit codes and report output."""
import json

import pytest

from lagland.api.cli import RunConfig, build_config, build_parser, main, parse_region, run
from lagland.core.errors import ConfigError
from lagland.core.geometry import NumericTolerances, configure_numerics, numerics
from lagland.utils.settings import ModelSettings, RunSettings, check_env_file, find_env_file_if_exists


class TestParseRegion:
    def test_bounds(self):
        assert parse_region("-1:1,0:2.5") == ((-1.0, 1.0), (0.0, 2.5))

    def test_empty_means_model_box(self):
        assert parse_region("") is None
        assert parse_region("  ") is None

    @pytest.mark.parametrize("text", ["1", "a:b", "0:1:2", "1:1", "2:-2"])
    def test_malformed(self, text):
        with pytest.raises(ConfigError):
            parse_region(text)


class TestRunConfig:
    @pytest.mark.parametrize("field, value", [("samples", 0), ("jobs", 0), ("tol", 0.0), ("seed", -1),
                                              ("format", "xml")])
    def test_invalid_values(self, field, value):
        with pytest.raises(ValueError):
            RunConfig(**{field: value})

    def test_echo_leaves_out_the_worker_count(self):
        echo = RunConfig(jobs=4).echo()
        assert "jobs" not in echo
        assert echo["seed"] == 42

    def test_flags_override_the_config_file(self, tmp_path):
        env = tmp_path / "run.env"
        env.write_text("LAGLAND_SEED=7\nLAGLAND_SAMPLES=300\nLAGLAND_SUITE=amoeba\n")
        args = build_parser().parse_args(["--config", str(env), "--seed", "9"])
        config, _, _ = build_config(args)
        assert config.seed == 9
        assert config.samples == 300
        assert config.suite == "amoeba"

    def test_numeric_settings_reach_the_solvers_and_the_report(self, tmp_path):
        env = tmp_path / "run.env"
        env.write_text("DRIFT_TOL=1e-7\nSTEPS_PER_UNIT_TIME=400\n")
        args = build_parser().parse_args(["--config", str(env), "--model", "toric_reference", "--suite", "amoeba"])
        config, model_settings, numeric = build_config(args)
        assert numeric.DRIFT_TOL == 1e-7
        try:
            report, _ = run(config, model_settings, numeric)
            assert numerics().drift_tol == 1e-7
            assert numerics().steps_per_unit_time == 400
            assert report.config["numerics"]["drift_tol"] == 1e-7
        finally:
            configure_numerics(NumericTolerances())

    def test_invalid_flag_value_is_a_config_error(self):
        args = build_parser().parse_args(["--samples", "0"])
        with pytest.raises(ConfigError):
            build_config(args)


class TestExitCodes:
    def test_unknown_model(self):
        assert main(["--model", "tetrahedron", "--suite", "lagrangian"]) == 2

    def test_unknown_suite(self):
        assert main(["--suite", "everything"]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["--config", str(tmp_path / "missing.env")]) == 2

    def test_key_without_value_in_config_file(self, tmp_path):
        env = tmp_path / "run.env"
        env.write_text("LAGLAND_SEED=7\nLAGLAND_SAMPLES\n")
        assert main(["--config", str(env)]) == 2

    def test_invalid_tolerance_in_config_file(self, tmp_path):
        env = tmp_path / "run.env"
        env.write_text("NEWTON_TOL=-1\n")
        assert main(["--config", str(env)]) == 2

    def test_unknown_format_is_rejected_by_the_parser(self):
        with pytest.raises(SystemExit):
            main(["--format", "xml"])

    def test_schema(self, capsys):
        assert main(["--schema"]) == 0
        assert json.loads(capsys.readouterr().out)["$id"] == "lagland-report-1.0"


class TestRun:
    def test_amoeba_suite_writes_report_and_rasters(self, tmp_path):
        out = tmp_path / "reports" / "run.json"
        status = main(["--model", "toric_reference", "--suite", "amoeba", "--out", str(out), "--format", "json"])
        assert status == 0
        report = json.loads(out.read_text())
        names = {r["name"] for r in report["records"]}
        assert "amoeba.unbounded_components" in names
        assert report["config"]["suite"] == "amoeba"
        assert (tmp_path / "reports" / "run_amoeba.pgm").read_text().startswith("P2")
        assert (tmp_path / "reports" / "run_amoeba_contour.csv").read_text().startswith("arc,x1,x2")

    def test_table_output(self, capsys):
        assert main(["--model", "toric_reference", "--suite", "semiflat", "--samples", "50"]) == 0
        table = capsys.readouterr().out
        assert "semiflat.half_lattice" in table
        assert "0 fail" in table

    def test_reports_do_not_depend_on_worker_count(self):
        config = RunConfig(model="toric_reference", suite="amoeba,semiflat", samples=50, seed=3)
        first, _ = run(config)
        second, _ = run(config.model_copy(update={"jobs": 2}))
        assert first.deterministic() == second.deterministic()


class TestSettingsFiles:
    def test_check_returns_upper_case_keys(self, tmp_path):
        env = tmp_path / "run.env"
        env.write_text("lagland_seed=7\nthin_leg_epsilon=0.5\nSOMETHING_ELSE=1\n")
        values = check_env_file(env, (RunSettings, ModelSettings))
        assert values["LAGLAND_SEED"] == "7"
        assert values["THIN_LEG_EPSILON"] == "0.5"

    def test_check_rejects_bare_keys(self, tmp_path):
        env = tmp_path / "run.env"
        env.write_text("LAGLAND_SEED\n")
        with pytest.raises(ValueError, match="LAGLAND_SEED"):
            check_env_file(env, (RunSettings,))

    def test_env_file_variable_wins(self, tmp_path, monkeypatch):
        env = tmp_path / "ci.env"
        env.write_text("LAGLAND_SEED=7\n")
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("LAGLAND_ENV_FILE", str(env))
        assert find_env_file_if_exists() == env

    def test_missing_env_file_variable_falls_back(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        monkeypatch.setenv("LAGLAND_ENV_FILE", str(tmp_path / "missing.env"))
        assert find_env_file_if_exists() is None
