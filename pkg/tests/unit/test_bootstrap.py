from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import pytest

from vortexlab.application.dtos import Table
from vortexlab.bootstrap import LabBootstrapConfig, build_lab_module
from vortexlab.core.config import settings
from vortexlab.exceptions import ConfigurationError
from vortexlab.presentation.plans import build_plan
from vortexlab.presentation.schemas import ExperimentConfig


class RecordingWriter:
    def __init__(self) -> None:
        self.calls: list[tuple[str, Any]] = []

    def write_report(self, directory: Path, payload: Mapping[str, Any]) -> Path:
        self.calls.append(("report", dict(payload)))
        return directory / "report.json"

    def write_table(self, directory: Path, table: Table) -> Path:
        self.calls.append(("table", table.name))
        return directory / f"{table.name}.csv"

    def write_timing(self, directory: Path, timing: Mapping[str, float]) -> Path:
        self.calls.append(("timing", dict(timing)))
        return directory / "timing.json"


def _plan(**overrides):
    payload = {
        "name": "bootstrap",
        "seed": 1,
        "lattice": {"dims": [3, 3, 3]},
        "model": {"kind": "toy", "beta": 1.0, "kappa": 0.5, "energies": [1.0, 0.0, 0.0, 0.0]},
        "loop": {"extent": [2, 2], "axes": [0, 1]},
    }
    payload.update(overrides)
    return build_plan(ExperimentConfig.model_validate(payload), settings=settings)


def test_unknown_subcommand_is_rejected() -> None:
    module = build_lab_module(config=LabBootstrapConfig())

    with pytest.raises(ConfigurationError):
        module.run("anneal", _plan())


def test_predict_through_the_module() -> None:
    module = build_lab_module(config=LabBootstrapConfig(threads=2))

    output = module.run("predict", _plan())

    assert output.subcommand == "predict"
    assert output.predictions["lambda"] == pytest.approx(8 * output.predictions["phi_minimal"])
    assert output.budgets is not None
    assert [table.name for table in output.tables] == ["poisson"]


def test_sampling_without_a_loop_is_a_config_error() -> None:
    module = build_lab_module(config=LabBootstrapConfig())

    with pytest.raises(ConfigurationError):
        module.run("sample", _plan(loop=None))


def test_compare_rejects_pure_higgs_models() -> None:
    module = build_lab_module(config=LabBootstrapConfig())
    plan = _plan(model={"kind": "K_N", "beta": 0.0, "kappa": 0.5})

    with pytest.raises(ConfigurationError):
        module.run("compare", plan)


def test_publish_writes_report_then_tables_then_timing() -> None:
    writer = RecordingWriter()
    module = build_lab_module(config=LabBootstrapConfig(), writer=writer)
    output = module.run("predict", _plan())

    written = module.publish.execute(Path("out"), {"passed": True}, output, {"wall_clock_seconds": 0.1})

    assert [kind for kind, _ in writer.calls] == ["report", "table", "timing"]
    assert written[0] == Path("out") / "report.json"
    assert written[-1] == Path("out") / "timing.json"
