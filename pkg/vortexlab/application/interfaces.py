from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Mapping, Protocol, Sequence, TypeVar

from .dtos import Table

T = TypeVar("T")
R = TypeVar("R")


class TaskExecutor(Protocol):
    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
        """Apply ``fn`` to every item and return the results in input order."""
        ...


class ReportWriter(Protocol):
    def write_report(self, directory: Path, payload: Mapping[str, Any]) -> Path:
        ...

    def write_table(self, directory: Path, table: Table) -> Path:
        ...

    def write_timing(self, directory: Path, timing: Mapping[str, float]) -> Path:
        ...
