from __future__ import annotations

import json
import os
import shutil
import tempfile
import uuid
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Generator

import pytest
from click.testing import CliRunner

from vortexlab import __version__
from vortexlab.core.logging_setup import RUN_LOG_FILE
from vortexlab.infrastructure.reports import REPORT_FILE, TIMING_FILE
from vortexlab.presentation.cli import compare, exact, main, perc, predict, sample

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


@contextmanager
def writable_temp_dir() -> Generator[Path, None, None]:
    root = Path(os.environ.get("VORTEXLAB_TEST_TMP_ROOT", tempfile.gettempdir()))
    root.mkdir(parents=True, exist_ok=True)
    tmp_path = root / f"vortexlab_test_{uuid.uuid4().hex}"
    tmp_path.mkdir(parents=True, exist_ok=True)
    try:
        yield tmp_path
    finally:
        shutil.rmtree(tmp_path, ignore_errors=True)


def _write_config(directory: Path, payload: dict[str, Any], name: str = "config.json") -> Path:
    path = directory / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def _small_toy(**overrides: Any) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "name": "small-toy",
        "seed": 5,
        "lattice": {"dims": [2, 2]},
        "group": {"kind": "cyclic", "order": 2},
        "higgs": {"order": 2},
        "model": {"kind": "toy", "beta": 0.4, "kappa": 0.3, "energies": [1.0, 0.2, 0.1, 0.0]},
        "loop": {"extent": [1, 1], "axes": [0, 1], "corner": [0, 0]},
        "schedule": {"measurements": 32, "burn_in": 4, "thinning": 1, "chains": 2},
    }
    payload.update(overrides)
    return payload


def _report(directory: Path) -> dict[str, Any]:
    return json.loads((directory / REPORT_FILE).read_text(encoding="utf-8"))


def test_version_flag() -> None:
    result = CliRunner().invoke(main, ["--version"])

    assert result.exit_code == 0
    assert __version__ in result.output


def test_exact_run_on_a_strip_passes_its_checks() -> None:
    with writable_temp_dir() as base:
        out = base / "exact"

        result = CliRunner().invoke(exact, ["--config", str(CONFIG_DIR / "toy_strip_exact.json"), "--out", str(out)])

        assert result.exit_code == 0, result.output
        report = _report(out)
        assert report["subcommand"] == "exact"
        assert report["checks"]["wilson_orders_agree"] is True
        assert report["checks"]["wilson_reference_agrees"] is True
        assert report["checks"]["phi_matches_closed_form"] is True
        assert report["checks"]["phi_below_upper_bound"] is True
        assert report["checks"]["phi_multiplicative"] is True
        assert report["observables"]["phi_pair_lattice"] == [8, 4]
        assert report["passed"] is True
        assert report["observables"]["states"] == 2**13
        assert (out / TIMING_FILE).exists()


def test_threaded_exact_run_gives_the_same_report() -> None:
    with writable_temp_dir() as base:
        config = str(CONFIG_DIR / "toy_strip_exact.json")
        runner = CliRunner()

        runner.invoke(exact, ["--config", config, "--out", str(base / "one"), "--threads", "1"])
        runner.invoke(exact, ["--config", config, "--out", str(base / "four"), "--threads", "4"])

        one = _report(base / "one")["observables"]
        four = _report(base / "four")["observables"]
        assert one["wilson"]["re"] == pytest.approx(four["wilson"]["re"], abs=1e-12)
        assert one["log_partition"] == pytest.approx(four["log_partition"], abs=1e-12)


def test_sample_reports_are_reproducible() -> None:
    with writable_temp_dir() as base:
        config = str(_write_config(base, _small_toy()))
        runner = CliRunner()

        first = runner.invoke(sample, ["--config", config, "--out", str(base / "first")])
        second = runner.invoke(sample, ["--config", config, "--out", str(base / "second"), "--threads", "2"])

        assert first.exit_code == 0, first.output
        assert second.exit_code == 0, second.output
        assert (base / "first" / REPORT_FILE).read_bytes() == (base / "second" / REPORT_FILE).read_bytes()
        assert (base / "first" / "series.csv").read_bytes() == (base / "second" / "series.csv").read_bytes()
        report = _report(base / "first")
        assert report["seed"] == 5
        assert report["series"] == ["series.csv"]
        assert report["checks"]["tv_sample_size_sufficient"] is False


def test_seed_flag_overrides_config_seed() -> None:
    with writable_temp_dir() as base:
        config = str(_write_config(base, _small_toy()))
        runner = CliRunner()

        runner.invoke(sample, ["--config", config, "--out", str(base / "a"), "--seed", "6"])
        runner.invoke(sample, ["--config", config, "--out", str(base / "b")])

        assert _report(base / "a")["seed"] == 6
        assert _report(base / "a")["config"]["seed"] == 6
        assert (base / "a" / "series.csv").read_bytes() != (base / "b" / "series.csv").read_bytes()


def test_predict_reports_lambda_and_budgets() -> None:
    with writable_temp_dir() as base:
        out = base / "predict"

        result = CliRunner().invoke(predict, ["--config", str(CONFIG_DIR / "toy_poisson_d3.json"), "--out", str(out)])

        assert result.exit_code == 0, result.output
        report = _report(out)
        predictions = report["predictions"]
        assert predictions["lambda"] == pytest.approx(16 * predictions["phi_minimal"])
        assert report["budgets"]["loop_length"] == 16
        assert "budget_valid" in report["checks"]
        assert report["series"] == ["poisson.csv"]


def test_compare_on_a_tiny_lattice_includes_the_exact_value() -> None:
    with writable_temp_dir() as base:
        payload = _small_toy(lattice={"dims": [1, 1]})
        config = str(_write_config(base, payload))
        out = base / "compare"

        result = CliRunner().invoke(compare, ["--config", config, "--out", str(out)])

        assert result.exit_code == 0, result.output
        report = _report(out)
        assert "wilson_exact" in report["observables"]
        assert report["checks"]["matches_exact"] is not None
        assert "wilson_gap" in report["observables"]
        assert sorted(report["series"]) == ["compare.csv", "series.csv"]


def test_percolation_run_writes_the_decay_table() -> None:
    with writable_temp_dir() as base:
        payload = _small_toy(
            lattice={"dims": [4, 4]},
            model={"kind": "random-current", "beta": 1.0, "kappa": 0.05, "f_table": [[1.0, 0.0], [0.0, 0.0]]},
            loop=None,
            schedule={"measurements": 1, "burn_in": 5, "thinning": 1},
            percolation={"kappas": [0.05], "distances": [1, 2], "samples": 5},
        )
        config = str(_write_config(base, payload))
        out = base / "perc"

        result = CliRunner().invoke(perc, ["--config", config, "--out", str(out)])

        assert result.exit_code == 0, result.output
        lines = (out / "decay.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "kappa,distance,probability,stderr,bond_probability,bond_stderr"
        assert len(lines) == 3


def test_unknown_config_key_exits_with_config_error() -> None:
    with writable_temp_dir() as base:
        config = str(_write_config(base, _small_toy(sweeps=10)))

        result = CliRunner().invoke(sample, ["--config", config, "--out", str(base / "out")])

        assert result.exit_code == 2
        assert not (base / "out").exists()


def test_invalid_json_exits_with_config_error() -> None:
    with writable_temp_dir() as base:
        config = base / "broken.json"
        config.write_text("{", encoding="utf-8")

        result = CliRunner().invoke(exact, ["--config", str(config)])

        assert result.exit_code == 2


def test_oversized_enumeration_exits_with_budget_error() -> None:
    with writable_temp_dir() as base:
        out = base / "exact"

        result = CliRunner().invoke(exact, ["--config", str(CONFIG_DIR / "z2_predict_d4.json"), "--out", str(out)])

        assert result.exit_code == 3
        assert not (out / REPORT_FILE).exists()
        assert "exact failed" in (out / RUN_LOG_FILE).read_text(encoding="utf-8")


def test_missing_seed_exits_with_seed_error() -> None:
    with writable_temp_dir() as base:
        config = str(_write_config(base, _small_toy(seed=None)))

        result = CliRunner().invoke(sample, ["--config", config, "--out", str(base / "out")])

        assert result.exit_code == 4
