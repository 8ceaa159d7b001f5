from __future__ import annotations

import json
import logging
import os
import shutil
import tempfile
import threading
import uuid
from contextlib import contextmanager
from pathlib import Path
from typing import Generator

import numpy as np
import pytest

from vortexlab.application.dtos import Table
from vortexlab.core.logging_setup import RUN_LOG_FILE, run_log
from vortexlab.exceptions import ConfigurationError
from vortexlab.infrastructure.executor import ThreadPoolTaskExecutor
from vortexlab.infrastructure.group_loader import load_group_file
from vortexlab.infrastructure.reports import REPORT_FILE, TIMING_FILE, FileReportWriter, canonical_json, to_jsonable

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


def test_executor_preserves_order() -> None:
    pool = ThreadPoolTaskExecutor(threads=4)

    assert pool.map(lambda x: x * x, range(10)) == [x * x for x in range(10)]
    assert pool.map(lambda x: x, []) == []


def test_single_thread_runs_inline() -> None:
    caller = threading.get_ident()

    idents = ThreadPoolTaskExecutor(threads=1).map(lambda _: threading.get_ident(), range(3))

    assert set(idents) == {caller}


def test_executor_needs_a_thread() -> None:
    with pytest.raises(ValueError):
        ThreadPoolTaskExecutor(threads=0)


def test_to_jsonable_spells_out_non_finite_values() -> None:
    payload = {
        "inf": float("inf"),
        "neg": -np.inf,
        "array": np.array([1.0, np.nan]),
        "complex": 1 + 2j,
        "count": np.int64(3),
        "flag": np.bool_(True),
        3: (1, 2),
    }

    assert to_jsonable(payload) == {
        "inf": "inf",
        "neg": "-inf",
        "array": [1.0, "nan"],
        "complex": {"re": 1.0, "im": 2.0},
        "count": 3,
        "flag": True,
        "3": [1, 2],
    }


def test_canonical_json_is_sorted_and_strict() -> None:
    text = canonical_json({"b": 1, "a": float("nan")})

    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": "nan", "b": 1}


def test_writer_lays_out_report_tables_and_timing() -> None:
    writer = FileReportWriter()
    table = Table("series", ("index", "value", "note"), ((0, 0.1, None), (1, float("inf"), "x")))

    with writable_temp_dir() as base:
        directory = base / "run"
        report = writer.write_report(directory, {"passed": True})
        series = writer.write_table(directory, table)
        timing = writer.write_timing(directory, {"wall_clock_seconds": 1.5})

        assert report.name == REPORT_FILE
        assert timing.name == TIMING_FILE
        assert json.loads(report.read_text(encoding="utf-8")) == {"passed": True}
        assert series.read_text(encoding="utf-8").splitlines() == ["index,value,note", "0,0.1,", "1,inf,x"]


def test_group_file_loads() -> None:
    group, rep = load_group_file(CONFIG_DIR / "groups" / "z3.json")

    assert group.order == 3
    assert rep.dim == 1


def test_group_file_errors_are_config_errors() -> None:
    with writable_temp_dir() as base:
        broken = base / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        listed = base / "list.json"
        listed.write_text("[1, 2]", encoding="utf-8")

        with pytest.raises(ConfigurationError):
            load_group_file(base / "missing.json")
        with pytest.raises(ConfigurationError):
            load_group_file(broken)
        with pytest.raises(ConfigurationError):
            load_group_file(listed)


def test_run_log_captures_records_only_inside_the_block() -> None:
    logger = logging.getLogger("vortexlab.tests.run_log")
    with writable_temp_dir() as base:
        with run_log(base / "run") as path:
            logger.warning("[!] inside")
        logger.warning("[!] outside")

        assert path.name == RUN_LOG_FILE
        text = path.read_text(encoding="utf-8")
        assert "[!] inside" in text
        assert "outside" not in text
        assert f"[{threading.current_thread().name}]" in text
