from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from vortexlab.application.dtos import Table

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
TIMING_FILE = "timing.json"


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf`` and ``nan``."""
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(value.real), "im": to_jsonable(value.imag)}
    return value


def canonical_json(payload: Any) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


@dataclass(frozen=True, slots=True)
class FileReportWriter:
    """Writes report.json, one CSV per table and a timing.json sidecar.

    Everything except the sidecar is a function of the run's inputs, so
    repeated runs with one seed give identical bytes.
    """

    def write_report(self, directory: Path, payload: Mapping[str, Any]) -> Path:
        return self._write_text(directory / REPORT_FILE, canonical_json(payload))

    def write_table(self, directory: Path, table: Table) -> Path:
        path = directory / f"{table.name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(table.fieldnames)
            for row in table.rows:
                writer.writerow([_cell(value) for value in row])
        logger.debug("[report] %s: %d rows", path.name, len(table.rows))
        return path

    def write_timing(self, directory: Path, timing: Mapping[str, float]) -> Path:
        return self._write_text(directory / TIMING_FILE, canonical_json(timing))

    @staticmethod
    def _write_text(path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        return path
