"""End-to-end pipeline runs, artifact determinism, CLI exit codes."""

import json
import os
import subprocess
import sys

import pytest

from scalefit.report import PipelineConfig, PipelineError, dumps_canonical, run_pipeline
from scalefit.run_store import emit_csv, filter_runs


def run_cli(*argv, env_extra=None, cwd=None):
    env = os.environ.copy()
    env.pop("SCALEFIT_OUT", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "scalefit.cli", *argv],
        capture_output=True, text=True, env=env, cwd=cwd,
    )


@pytest.fixture(scope="module")
def pipeline_report(clean_surface_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("report")
    config = PipelineConfig(
        input_path=str(clean_surface_csv),
        out_dir=str(out),
        target_tokens=2**37,
        refine_optima=True,
        plot_data=("sensitivity", "best-loss"),
    )
    return run_pipeline(config), out


def test_pipeline_recovers_ground_truth_exponents(pipeline_report):
    report, _ = pipeline_report
    laws = report.data["power_laws"]
    assert abs(laws["b_crit"]["consolidated_exponent"]["alpha_hat"] - 1.0) < 1e-3
    assert abs(laws["eta_crit"]["consolidated_exponent"]["alpha_hat"] + 1.3) < 1e-2


def test_pipeline_report_structure(pipeline_report):
    report, out = pipeline_report
    data = report.data
    for key in ("tool", "input", "config", "optima", "surge_fits",
                "power_laws", "b_star", "recommendation", "warnings"):
        assert key in data
    assert data["input"]["sha256"]
    assert len(data["surge_fits"]) == 18  # 6 budgets x 3 variants
    assert (out / "report.json").exists()
    assert (out / "optima.csv").exists()
    assert (out / "figures" / "surge_fits.png").stat().st_size > 0
    assert (out / "plot_data" / "best-loss.json").exists()


def test_pipeline_rerun_is_byte_identical(pipeline_report, tmp_path):
    report, out = pipeline_report
    config = PipelineConfig(
        input_path=report.data["input"]["path"],
        out_dir=str(tmp_path),
        target_tokens=2**37,
        refine_optima=True,
        plot_data=("sensitivity", "best-loss"),
    )
    run_pipeline(config)
    first = (out / "report.json").read_bytes()
    second = (tmp_path / "report.json").read_bytes()
    assert first == second


def test_pipeline_single_budget_errors_with_stage_name(clean_surface, tmp_path):
    one = filter_runs(clean_surface, tokens=2**30)
    path = tmp_path / "one.csv"
    path.write_text(emit_csv(one), encoding="utf-8")
    config = PipelineConfig(input_path=str(path), out_dir=None)
    with pytest.raises(PipelineError, match="fit-powerlaw.*4 budgets"):
        run_pipeline(config)


def test_pipeline_rejects_unknown_plot_data(clean_surface_csv):
    config = PipelineConfig(input_path=str(clean_surface_csv),
                            plot_data=("histogram",))
    with pytest.raises(PipelineError, match="histogram"):
        run_pipeline(config)


def test_dumps_canonical_sanitizes_non_finite():
    text = dumps_canonical({"a": float("inf"), "b": float("nan"), "c": 1.0})
    blob = json.loads(text)
    assert blob["a"] == "inf"
    assert blob["b"] == "nan"
    assert blob["c"] == 1.0
    assert text.endswith("\n")


def test_cli_report_writes_artifacts(clean_surface_csv, tmp_path):
    res = run_cli("report", "--input", str(clean_surface_csv),
                  "--out", str(tmp_path / "o"), "--no-figures")
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "o" / "report.json").exists()
    listed = res.stdout.splitlines()
    assert str(tmp_path / "o" / "report.json") in listed


def test_cli_scalefit_out_env_supplies_default_dir(clean_surface_csv, tmp_path):
    res = run_cli("report", "--input", str(clean_surface_csv), "--no-figures",
                  env_extra={"SCALEFIT_OUT": str(tmp_path / "env_out")})
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "env_out" / "report.json").exists()


def test_cli_usage_error_is_exit_1():
    assert run_cli("report").returncode == 1
    assert run_cli("frobnicate").returncode == 1


def test_cli_data_error_is_exit_2(tmp_path):
    missing = run_cli("report", "--input", str(tmp_path / "nope.csv"))
    assert missing.returncode == 2
    assert missing.stderr.startswith("error:")

    bad = tmp_path / "bad.csv"
    bad.write_text("run_id,d_model\n", encoding="utf-8")
    res = run_cli("ingest", "--input", str(bad))
    assert res.returncode == 2


def test_cli_single_budget_fit_error_names_stage(clean_surface, tmp_path):
    one = filter_runs(clean_surface, tokens=2**30)
    path = tmp_path / "one.csv"
    path.write_text(emit_csv(one), encoding="utf-8")
    res = run_cli("report", "--input", str(path), "--out", str(tmp_path / "o"))
    assert res.returncode == 2
    assert "fit-powerlaw" in res.stderr


def test_cli_schedule_csv_shape():
    res = run_cli("schedule", "--eta-max", "2^-9", "--total-tokens", "2^20",
                  "--warmup-tokens", "2^18", "--batch-size", "2^16")
    assert res.returncode == 0
    lines = res.stdout.splitlines()
    assert lines[0] == "step,tokens,lr"
    assert len(lines) == 1 + 16
    last = lines[-1].split(",")
    assert last[0] == "16" and last[1] == str(2**20)


def test_cli_grid_output_is_reingestible_after_filling(tmp_path):
    res = run_cli("grid")
    assert res.returncode == 0
    filled = "\n".join(
        line if i == 0 else line + "3.5"
        for i, line in enumerate(res.stdout.splitlines())
    ) + "\n"
    path = tmp_path / "grid.csv"
    path.write_text(filled, encoding="utf-8")
    check = run_cli("ingest", "--input", str(path))
    assert check.returncode == 0, check.stderr


def test_cli_config_file_defaults_and_precedence(clean_surface_csv, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": str(clean_surface_csv),
                               "tokens": "2^31"}), encoding="utf-8")
    res = run_cli("--config", str(cfg), "fit-surge")
    assert res.returncode == 0, res.stderr
    fits = json.loads(res.stdout)["fits"]
    assert {f["tokens"] for f in fits} == {2**31}

    res = run_cli("--config", str(cfg), "fit-surge", "--tokens", "2^32")
    assert {f["tokens"] for f in json.loads(res.stdout)["fits"]} == {2**32}
