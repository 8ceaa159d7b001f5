from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from vortexlab.application.dtos import MagnetizationSource
from vortexlab.domain.value_objects import ModelKind, SupportKind, UpdateRule


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeSpec(_Strict):
    dims: list[int] = Field(min_length=2, max_length=4)

    @field_validator("dims")
    @classmethod
    def positive_sides(cls, value: list[int]) -> list[int]:
        if any(side < 1 for side in value):
            raise ValueError("lattice sides must be positive")
        return value


class GroupSpec(_Strict):
    kind: str = "cyclic"
    order: int | None = Field(default=2, ge=1)
    rep: str = "faithful"
    file: str | None = None
    quotient_kernel: bool = False


class HiggsSpec(_Strict):
    order: int = Field(default=2, ge=1)
    quotient: bool = False


class ModelSpec(_Strict):
    kind: ModelKind = ModelKind.TOY
    beta: float = Field(ge=0)
    kappa: float = Field(ge=0)
    energies: list[float] | None = Field(default=None, min_length=4, max_length=4)
    f_table: list[list[float]] | None = None
    offset_c: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def check_tables(self) -> "ModelSpec":
        if self.energies is not None and self.f_table is not None:
            raise ValueError("give either energies or f_table, not both")
        if self.kind is ModelKind.TOY and self.energies is None:
            raise ValueError("the toy model needs energies [E1, E2, E3, E4]")
        return self


class LoopSpec(_Strict):
    extent: tuple[int, int] = (1, 1)
    axes: tuple[int, int] = (0, 1)
    corner: list[int] | None = None


class ScheduleSpec(_Strict):
    measurements: int = Field(default=1000, ge=1)
    burn_in: int | None = Field(default=None, ge=0)
    thinning: int | None = Field(default=None, ge=1)
    chains: int = Field(default=1, ge=1)
    update: UpdateRule = UpdateRule.METROPOLIS
    batches: int | None = Field(default=None, ge=16)


class PredictSpec(_Strict):
    distance: int = Field(default=2, ge=1)
    dimension: int | None = Field(default=None, ge=2, le=4)
    kappa_corrected: bool = False
    magnetization: MagnetizationSource = MagnetizationSource.NONE
    magnetization_samples: int = Field(default=0, ge=0)
    decay_rate: float | None = Field(default=None, gt=0)
    min_probability: float | None = Field(default=None, gt=0, le=1)
    vortex_count_max: int = Field(default=0, ge=0)


class PercolationSpec(_Strict):
    kappas: list[float] = Field(min_length=1)
    distances: list[int] = Field(min_length=1)
    samples: int = Field(default=100, ge=1)

    @field_validator("distances")
    @classmethod
    def positive_distances(cls, value: list[int]) -> list[int]:
        if any(distance < 1 for distance in value):
            raise ValueError("distances must be positive")
        return value


class AnalysisSpec(_Strict):
    support: SupportKind | None = None
    validate_samples: bool = False


class OutputSpec(_Strict):
    directory: str | None = None


class ExperimentConfig(_Strict):
    name: str = "experiment"
    seed: int | None = Field(default=None, ge=0)
    lattice: LatticeSpec
    group: GroupSpec = Field(default_factory=GroupSpec)
    higgs: HiggsSpec = Field(default_factory=HiggsSpec)
    model: ModelSpec
    loop: LoopSpec | None = None
    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)
    predict: PredictSpec = Field(default_factory=PredictSpec)
    percolation: PercolationSpec | None = None
    analysis: AnalysisSpec = Field(default_factory=AnalysisSpec)
    outputs: OutputSpec = Field(default_factory=OutputSpec)


class ExperimentReport(_Strict):
    subcommand: str
    version: str
    config: dict[str, Any]
    config_sha256: str
    seed: int | None
    observables: dict[str, Any]
    predictions: dict[str, Any]
    budgets: dict[str, Any] | None
    checks: dict[str, bool | None]
    passed: bool
    series: list[str]
    notes: list[str]
