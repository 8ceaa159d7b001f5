from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from vortexlab.domain.lattice import Lattice, Loop
from vortexlab.domain.value_objects import ModelParams, SupportKind
from vortexlab.services.predictor import ErrorBudget, TVEstimate
from vortexlab.services.samplers import ObservableSeries, Schedule
from vortexlab.services.statistics import BatchEstimate


class MagnetizationSource(str, Enum):
    NONE = "none"
    EXACT = "exact"
    SAMPLED = "sampled"


@dataclass(frozen=True, slots=True)
class PercolationPlan:
    kappas: tuple[float, ...]
    distances: tuple[int, ...]
    samples: int


@dataclass(frozen=True, slots=True)
class ExperimentPlan:
    """Everything a run needs, resolved from an experiment config into domain objects."""

    name: str
    lattice: Lattice
    params: ModelParams
    loop: Loop | None
    seed: int | None
    schedule: Schedule
    distance: int = 2
    weight_dimension: int | None = None
    kappa_corrected: bool = False
    magnetization: MagnetizationSource = MagnetizationSource.NONE
    magnetization_samples: int = 0
    decay_rate: float | None = None
    min_probability: float | None = None
    vortex_count_max: int = 0
    support: SupportKind | None = None
    validate: bool = False
    percolation: PercolationPlan | None = None
    max_states: int = 2**26
    chunk_size: int = 2**16
    tv_min_samples: int = 1000
    bootstrap_resamples: int = 200
    current_tolerance: float = 1e-14
    separation_max_growth: int = 3
    vortex_enumeration_max_pairs: int = 8

    @property
    def d(self) -> int:
        return self.weight_dimension or self.lattice.d

    @property
    def loop_length(self) -> int:
        return self.loop.length if self.loop is not None else 0


@dataclass(frozen=True, slots=True)
class Table:
    """One CSV series: column names and rows in write order."""

    name: str
    fieldnames: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]


@dataclass(slots=True)
class RunOutput:
    """Sections of an experiment report produced by one subcommand."""

    subcommand: str
    observables: dict[str, Any] = field(default_factory=dict)
    predictions: dict[str, Any] = field(default_factory=dict)
    budgets: dict[str, Any] | None = None
    checks: dict[str, bool | None] = field(default_factory=dict)
    tables: list[Table] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def absorb(self, other: "RunOutput", prefix: str) -> None:
        self.observables.update({f"{prefix}.{key}": value for key, value in other.observables.items()})
        self.predictions.update(other.predictions)
        self.checks.update({f"{prefix}.{key}": value for key, value in other.checks.items()})
        self.tables.extend(other.tables)
        self.notes.extend(other.notes)
        if other.budgets is not None:
            self.budgets = other.budgets


@dataclass(frozen=True, slots=True)
class SampleResult:
    series: tuple[ObservableSeries, ...]
    merged: ObservableSeries
    estimates: dict[str, BatchEstimate]
    lam: float
    tv: TVEstimate
    trace_estimate: BatchEstimate | None = None


@dataclass(frozen=True, slots=True)
class Prediction:
    phi: float
    lam: float
    a: np.ndarray
    wilson: complex
    budget: ErrorBudget
    chen_stein: float
    d_value: np.ndarray | None = None
    d_lambda: float | None = None
    d_wilson: complex | None = None
