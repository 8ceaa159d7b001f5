from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from vortexlab.domain.groups import FiniteGroup, HiggsGroup, UnitaryRep
from vortexlab.domain.lattice import Lattice
from vortexlab.exceptions import ValidationError


class ModelKind(str, Enum):
    TOY = "toy"
    GENERAL_ABELIAN = "general-abelian"
    GAUGED_OUT = "gauged-out"
    NON_ABELIAN = "non-abelian"
    K_N = "K_N"
    RANDOM_CURRENT = "random-current"

    @property
    def samples_eta(self) -> bool:
        return self is ModelKind.K_N

    @property
    def has_higgs(self) -> bool:
        return self is not ModelKind.GAUGED_OUT


class SupportKind(str, Enum):
    LOW_DISORDER = "low-disorder"
    PURE_GAUGE = "pure-gauge"
    RANDOM_CURRENT = "random-current"


class VortexClass(str, Enum):
    NON_CONTRIBUTING = "non-contributing"
    MINIMAL_ON_LOOP = "minimal-on-loop"
    WILSON_TRIVIAL = "wilson-trivial"
    WILSON_NONTRIVIAL = "wilson-nontrivial"


class UpdateRule(str, Enum):
    METROPOLIS = "metropolis"
    HEAT_BATH = "heat-bath"


class PhiVariant(str, Enum):
    PHI = "phi"
    NONTRIVIAL = "phi-nt"
    WILSON = "phi-w"
    UPPER_BOUND = "phi-ub"


@dataclass(frozen=True, slots=True, eq=False)
class ModelParams:
    """Couplings and interaction tables of one model.

    ``f_table[g, h]`` is the Higgs energy of an oriented edge carrying gauge
    element ``g`` and Higgs phase ``h = phi_tail - phi_head``. ``edge_table``
    pairs the two orientations of an unoriented edge.
    """

    kind: ModelKind
    group: FiniteGroup
    rep: UnitaryRep
    higgs: HiggsGroup
    beta: float
    kappa: float
    f_table: np.ndarray
    offset_c: float = 0.0
    higgs_values: tuple[int, ...] | None = None
    edge_table: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.beta < 0 or self.kappa < 0:
            raise ValueError("beta and kappa must be non-negative")
        if self.offset_c < 0:
            raise ValueError("random-current offset c must be non-negative")
        table = np.asarray(self.f_table, dtype=np.float64)
        if table.shape != (self.group.order, self.higgs.order):
            raise ValidationError(
                f"f-table must have shape ({self.group.order}, {self.higgs.order}), got {table.shape}"
            )
        if not np.all(np.isfinite(table)):
            raise ValidationError("f-table entries must be finite")
        if self.kind is ModelKind.TOY:
            if self.group.order != 2 or self.higgs.order != 2:
                raise ValidationError("the toy model needs Z2 gauge and Z2 Higgs fields")
            if table[0, 0] <= max(table[0, 1], table[1, 0], table[1, 1]):
                raise ValidationError("toy model requires E1 > max(E2, E3, E4)")
        if self.higgs_values is not None:
            if not self.higgs_values or any(not 0 <= h < self.higgs.order for h in self.higgs_values):
                raise ValidationError("allowed Higgs values must be a non-empty subset of H")
        table.flags.writeable = False
        higgs_inverse = (-np.arange(self.higgs.order)) % self.higgs.order
        edge_table = table + table[self.group.inverse][:, higgs_inverse]
        edge_table.flags.writeable = False
        object.__setattr__(self, "f_table", table)
        object.__setattr__(self, "edge_table", edge_table)

    @property
    def allowed_higgs(self) -> np.ndarray:
        if self.higgs_values is None:
            return np.arange(self.higgs.order, dtype=np.int64)
        return np.asarray(self.higgs_values, dtype=np.int64)

    @property
    def ground_edge_energy(self) -> float:
        return float(self.edge_table[self.group.identity, 0])

    def with_couplings(self, *, beta: float | None = None, kappa: float | None = None) -> "ModelParams":
        return ModelParams(
            kind=self.kind,
            group=self.group,
            rep=self.rep,
            higgs=self.higgs,
            beta=self.beta if beta is None else beta,
            kappa=self.kappa if kappa is None else kappa,
            f_table=self.f_table,
            offset_c=self.offset_c,
            higgs_values=self.higgs_values,
        )

    def with_offset(self, offset_c: float) -> "ModelParams":
        return ModelParams(
            kind=self.kind,
            group=self.group,
            rep=self.rep,
            higgs=self.higgs,
            beta=self.beta,
            kappa=self.kappa,
            f_table=self.f_table,
            offset_c=offset_c,
            higgs_values=self.higgs_values,
        )


@dataclass(slots=True)
class Configuration:
    """Field values of one chain. Mutable; owned by a single chain at a time."""

    sigma: np.ndarray
    phi: np.ndarray
    currents: np.ndarray | None = None
    eta: np.ndarray | None = None

    @classmethod
    def ground(cls, lat: Lattice, params: ModelParams, *, with_currents: bool = False) -> "Configuration":
        return cls(
            sigma=np.full(lat.n_edges, params.group.identity, dtype=np.int64),
            phi=np.zeros(lat.n_vertices, dtype=np.int64),
            currents=np.zeros(lat.n_edges, dtype=np.int64) if with_currents else None,
            eta=np.full(lat.n_vertices, params.group.identity, dtype=np.int64) if params.kind.samples_eta else None,
        )

    def validate(self, lat: Lattice, params: ModelParams) -> None:
        if self.sigma.shape != (lat.n_edges,) or self.phi.shape != (lat.n_vertices,):
            raise ValidationError("configuration does not match the lattice")
        if np.any(self.sigma < 0) or np.any(self.sigma >= params.group.order):
            raise ValidationError("gauge field holds an element outside G")
        if np.any(self.phi < 0) or np.any(self.phi >= params.higgs.order):
            raise ValidationError("Higgs field holds a phase outside H")
        if self.currents is not None:
            if params.kind is not ModelKind.RANDOM_CURRENT:
                raise ValidationError("currents are only defined for random-current models")
            if self.currents.shape != (lat.n_edges,) or np.any(self.currents < 0):
                raise ValidationError("currents must be non-negative integers per edge")
        if self.eta is not None and (self.eta.shape != (lat.n_vertices,) or np.any(self.eta >= params.group.order)):
            raise ValidationError("eta field does not match the lattice or group")

    def copy(self) -> "Configuration":
        return Configuration(
            sigma=self.sigma.copy(),
            phi=self.phi.copy(),
            currents=None if self.currents is None else self.currents.copy(),
            eta=None if self.eta is None else self.eta.copy(),
        )


@dataclass(frozen=True, slots=True)
class EdgeUpdate:
    edge: int
    value: int


@dataclass(frozen=True, slots=True)
class HiggsUpdate:
    vertex: int
    value: int


@dataclass(frozen=True, slots=True)
class EtaUpdate:
    vertex: int
    value: int


SiteUpdate = EdgeUpdate | HiggsUpdate | EtaUpdate
