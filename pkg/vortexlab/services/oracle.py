"""Exhaustive enumeration of tiny lattices.

States are mixed-radix integers over (gauge edges, then vertex fields) and
are streamed in fixed-size chunks. Each chunk returns a scaled partial sum
``(max log-weight, sum of exp(log-weight - max))`` and the partials are
combined in chunk order, so results do not depend on how chunks were
scheduled.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence, TypeVar

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy

from vortexlab.domain.analysis import (
    excited_plaquette_mask,
    minimal_center,
    support_low_disorder,
    vortex_decomposition,
)
from vortexlab.domain.hamiltonians import (
    current_cutoff,
    current_means,
    higgs_term,
    kn_energy,
    model_energy,
    plaquette_term,
    wilson_loop_values,
)
from vortexlab.domain.lattice import Lattice, Loop, PlaquetteSet, minimal_vortex
from vortexlab.domain.union_find import UnionFind
from vortexlab.domain.value_objects import Configuration, ModelKind, ModelParams, PhiVariant
from vortexlab.exceptions import BudgetExceededError, ValidationError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")
MapFn = Callable[[Callable[[T], R], Sequence[T]], list[R]]

DEFAULT_MAX_STATES = 2**26
DEFAULT_CHUNK_SIZE = 2**16


def sequential_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    return [fn(item) for item in items]


@dataclass(slots=True)
class EnumerationBudget:
    max_states: int = DEFAULT_MAX_STATES
    visited: int = 0

    def check(self, states: int) -> None:
        if states > self.max_states:
            raise BudgetExceededError(
                f"enumeration needs {states} states, above the budget of {self.max_states}"
            )

    def record(self, states: int) -> None:
        self.visited += states


@dataclass(frozen=True, slots=True)
class FieldBatch:
    sigma: np.ndarray
    phi: np.ndarray
    eta: np.ndarray | None = None

    def __len__(self) -> int:
        return int(self.sigma.shape[0])

    def configuration(self, row: int) -> Configuration:
        return Configuration(
            sigma=self.sigma[row].copy(),
            phi=self.phi[row].copy(),
            eta=None if self.eta is None else self.eta[row].copy(),
        )


BatchFn = Callable[[FieldBatch], np.ndarray]


def per_configuration(fn: Callable[[Configuration], object], dtype: type = np.float64) -> BatchFn:
    """Lift a single-configuration function to a batch function."""

    def _batch(batch: FieldBatch) -> np.ndarray:
        return np.array([fn(batch.configuration(row)) for row in range(len(batch))], dtype=dtype)

    return _batch


@dataclass(frozen=True, slots=True)
class _StateSpace:
    """Mixed-radix layout: free gauge edges, then free vertex slots."""

    edges: np.ndarray
    vertex_groups: tuple[np.ndarray, ...]
    edge_radix: int
    vertex_values: np.ndarray
    eta_groups: tuple[np.ndarray, ...] = ()
    eta_radix: int = 0

    @property
    def radices(self) -> np.ndarray:
        parts = [np.full(self.edges.size, self.edge_radix)]
        parts.append(np.full(len(self.eta_groups), self.eta_radix))
        parts.append(np.full(len(self.vertex_groups), self.vertex_values.size))
        return np.concatenate(parts).astype(np.int64)

    @property
    def size(self) -> int:
        return int(np.prod(self.radices.astype(object))) if self.radices.size else 1


def _decode(space: _StateSpace, lat: Lattice, params: ModelParams, start: int, stop: int) -> FieldBatch:
    radices = space.radices
    index = np.arange(start, stop, dtype=np.int64)
    places = np.ones(radices.size, dtype=np.int64)
    if radices.size:
        places[:-1] = np.cumprod(radices[::-1])[::-1][1:]
    digits = (index[:, None] // places[None, :]) % radices[None, :] if radices.size else np.zeros((index.size, 0), np.int64)

    n_edges = space.edges.size
    n_eta = len(space.eta_groups)
    sigma = np.full((index.size, lat.n_edges), params.group.identity, dtype=np.int64)
    sigma[:, space.edges] = digits[:, :n_edges]
    eta = None
    if space.eta_groups:
        eta = np.full((index.size, lat.n_vertices), params.group.identity, dtype=np.int64)
        for slot, members in enumerate(space.eta_groups):
            eta[:, members] = digits[:, n_edges + slot, None]
    phi = np.zeros((index.size, lat.n_vertices), dtype=np.int64)
    for slot, members in enumerate(space.vertex_groups):
        phi[:, members] = space.vertex_values[digits[:, n_edges + n_eta + slot]][:, None]
    return FieldBatch(sigma=sigma, phi=phi, eta=eta)


def _full_space(lat: Lattice, params: ModelParams) -> _StateSpace:
    singletons = tuple(np.array([v]) for v in range(lat.n_vertices))
    if params.kind is ModelKind.K_N:
        return _StateSpace(
            edges=np.zeros(0, dtype=np.int64),
            vertex_groups=singletons,
            edge_radix=params.group.order,
            vertex_values=params.allowed_higgs,
            eta_groups=singletons,
            eta_radix=params.group.order,
        )
    return _StateSpace(
        edges=np.arange(lat.n_edges),
        vertex_groups=() if params.kind is ModelKind.GAUGED_OUT else singletons,
        edge_radix=params.group.order,
        vertex_values=params.allowed_higgs,
    )


def state_count(lat: Lattice, params: ModelParams) -> int:
    """Number of states a full enumeration of ``params`` on ``lat`` visits."""
    return _full_space(lat, params).size


def log_weights(lat: Lattice, params: ModelParams, batch: FieldBatch) -> np.ndarray:
    """Gibbs log-weight of every row; random currents are summed out analytically."""
    if params.kind is ModelKind.K_N:
        return kn_energy(batch.eta, batch.phi, params, lat)
    weight = plaquette_term(lat, params, batch.sigma) + higgs_term(lat, params, batch.sigma, batch.phi)
    return np.broadcast_to(weight, (len(batch),)).astype(np.float64)


@dataclass(frozen=True, slots=True)
class _Partial:
    scale: float
    total: complex
    weight: float
    extra: np.ndarray | None = None


def _combine(partials: Sequence[_Partial]) -> _Partial:
    scale = max(partial.scale for partial in partials)
    total = 0j
    weight = 0.0
    extra = None
    for partial in partials:
        factor = np.exp(partial.scale - scale) if np.isfinite(partial.scale) else 0.0
        total += partial.total * factor
        weight += partial.weight * factor
        if partial.extra is not None:
            extra = partial.extra * factor if extra is None else extra + partial.extra * factor
    return _Partial(scale=scale, total=total, weight=weight, extra=extra)


@dataclass(slots=True)
class ExactOracle:
    lat: Lattice
    params: ModelParams
    budget: EnumerationBudget = field(default_factory=EnumerationBudget)
    chunk_size: int = DEFAULT_CHUNK_SIZE
    map_fn: MapFn = sequential_map

    def reduce(
        self,
        space: _StateSpace,
        observable: BatchFn | None,
        mask: BatchFn | None = None,
        reverse: bool = False,
    ) -> _Partial:
        states = space.size
        self.budget.check(states)
        bounds = [(start, min(start + self.chunk_size, states)) for start in range(0, states, self.chunk_size)]
        if reverse:
            bounds = bounds[::-1]

        def _chunk(bound: tuple[int, int]) -> _Partial:
            batch = _decode(space, self.lat, self.params, *bound)
            logw = log_weights(self.lat, self.params, batch)
            if mask is not None:
                logw = np.where(mask(batch), logw, -np.inf)
            scale = float(logw.max()) if logw.size else -np.inf
            if not np.isfinite(scale):
                return _Partial(scale=-np.inf, total=0j, weight=0.0)
            w = np.exp(logw - scale)
            if reverse:
                w = w[::-1]
            values = observable(batch) if observable is not None else None
            if values is not None and reverse:
                values = values[::-1]
            total = complex(np.sum(w * values)) if values is not None else 0j
            return _Partial(scale=scale, total=total, weight=float(np.sum(w)))

        partials = self.map_fn(_chunk, bounds)
        self.budget.record(states)
        return _combine(partials)

    def log_partition(self) -> float:
        result = self.reduce(_full_space(self.lat, self.params), None)
        return float(np.log(result.weight) + result.scale)

    def partition(self) -> float:
        """Z = sum over all states of exp[H]."""
        return float(np.exp(self.log_partition()))

    def expectation(self, observable: BatchFn, *, reverse: bool = False) -> complex:
        result = self.reduce(_full_space(self.lat, self.params), observable, reverse=reverse)
        return result.total / result.weight

    def event_probability(self, predicate: BatchFn) -> float:
        result = self.reduce(
            _full_space(self.lat, self.params),
            lambda batch: predicate(batch).astype(np.float64),
        )
        return float((result.total / result.weight).real)

    def conditional_probability(self, event: BatchFn, condition: BatchFn) -> float:
        space = _full_space(self.lat, self.params)
        conditioned = self.reduce(space, lambda batch: event(batch).astype(np.float64), mask=condition)
        if conditioned.weight == 0:
            raise ValidationError("conditioning event has probability zero")
        return float((conditioned.total / conditioned.weight).real)


def exact_partition(params: ModelParams, lat: Lattice, **options: object) -> float:
    return ExactOracle(lat, params, **options).partition()


def exact_expectation(params: ModelParams, lat: Lattice, observable: BatchFn, **options: object) -> complex:
    return ExactOracle(lat, params, **options).expectation(observable)


def exact_event_probability(params: ModelParams, lat: Lattice, predicate: BatchFn, **options: object) -> float:
    return ExactOracle(lat, params, **options).event_probability(predicate)


def wilson_observable(params: ModelParams, loop: Loop) -> BatchFn:
    return lambda batch: wilson_loop_values(params.rep, batch.sigma, loop)


def reference_expectation(
    params: ModelParams,
    lat: Lattice,
    observable: Callable[[Configuration], complex],
    budget: EnumerationBudget | None = None,
) -> complex:
    """State-by-state summation in the opposite digit order, independent of the chunked path."""
    if params.kind is ModelKind.K_N:
        raise ValidationError("reference summation covers gauge models only")
    budget = budget or EnumerationBudget()
    higgs_free = params.kind is not ModelKind.GAUGED_OUT
    n_vertex = lat.n_vertices if higgs_free else 0
    budget.check(params.group.order**lat.n_edges * params.allowed_higgs.size**n_vertex)
    values = params.allowed_higgs
    weights: list[float] = []
    observed: list[complex] = []
    for phi_digits in itertools.product(range(values.size), repeat=n_vertex):
        phi = values[list(phi_digits)] if n_vertex else np.zeros(lat.n_vertices, dtype=np.int64)
        for sigma in itertools.product(range(params.group.order), repeat=lat.n_edges):
            cfg = Configuration(sigma=np.array(sigma, dtype=np.int64), phi=np.asarray(phi, dtype=np.int64))
            weights.append(model_energy(cfg, params, lat))
            observed.append(observable(cfg))
    logw = np.array(weights)
    w = np.exp(logw - logw.max())
    return complex(np.sum(w * np.array(observed)) / np.sum(w))


def _components_without(lat: Lattice, removed_edges: frozenset[int]) -> tuple[np.ndarray, ...]:
    forest = UnionFind(lat.n_vertices)
    for edge in range(lat.n_edges):
        if edge not in removed_edges:
            forest.union(int(lat.edge_tail[edge]), int(lat.edge_head[edge]))
    return tuple(np.array(members, dtype=np.int64) for members in forest.retrieve_components())


def _bounding_box_edge_count(lat: Lattice, plaquettes: PlaquetteSet) -> int:
    points = lat.coords[sorted(plaquettes.vertices)]
    low, high = points.min(axis=0), points.max(axis=0)
    inside = np.all((lat.coords >= low) & (lat.coords <= high), axis=1)
    return int(np.sum(inside[lat.edge_tail] & inside[lat.edge_head]))


def phi_upper_bound(params: ModelParams, lat: Lattice, plaquettes: PlaquetteSet) -> float:
    """|G|^{|E(V)|} exp[2 beta max_{a != 1} Re(Tr rho(a) - D)]^{|V|} exp[kappa (max f - min f) 2 |E(C(V))|]."""
    if not plaquettes.plaquettes:
        return 1.0
    gauge = params.group.order ** len(plaquettes.edges)
    plaquette_factor = np.exp(2.0 * params.beta * params.rep.max_excitation() * len(plaquettes))
    spread = float(params.f_table.max() - params.f_table.min())
    edge_factor = np.exp(params.kappa * spread * 2 * _bounding_box_edge_count(lat, plaquettes))
    return float(gauge * plaquette_factor * edge_factor)


def exact_phi(
    params: ModelParams,
    lat: Lattice,
    plaquettes: PlaquetteSet,
    variant: PhiVariant | str = PhiVariant.PHI,
    loop: Loop | None = None,
    *,
    budget: EnumerationBudget | None = None,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
    map_fn: MapFn = sequential_map,
) -> complex | float:
    """Gibbs mass of configurations whose low-disorder support is exactly ``plaquettes``.

    Gauge values vary on E(P) only and the Higgs field is constant on each
    component of the lattice with E(P) removed; the sum is divided by the
    number of Higgs values, which fixes the global charge.
    """
    variant = PhiVariant(variant)
    if variant is PhiVariant.UPPER_BOUND:
        return phi_upper_bound(params, lat, plaquettes)
    if variant in (PhiVariant.NONTRIVIAL, PhiVariant.WILSON) and loop is None:
        raise ValidationError(f"{variant.value} needs a loop")
    if params.kind in (ModelKind.K_N, ModelKind.GAUGED_OUT):
        raise ValidationError("polymer weights are defined for models with a Higgs field")
    budget = budget or EnumerationBudget()
    edges = np.array(sorted(plaquettes.edges), dtype=np.int64)
    components = _components_without(lat, plaquettes.edges)
    space = _StateSpace(
        edges=edges,
        vertex_groups=components,
        edge_radix=params.group.order,
        vertex_values=params.allowed_higgs,
    )
    target = np.zeros(lat.n_plaquettes, dtype=bool)
    target[sorted(plaquettes.plaquettes)] = True
    support_edges = np.zeros(lat.n_edges, dtype=bool)
    support_edges[edges] = True

    def _support_matches(batch: FieldBatch) -> np.ndarray:
        excited = (batch.sigma != params.group.identity) | (
            batch.phi[:, lat.edge_tail] != batch.phi[:, lat.edge_head]
        )
        covered = np.zeros((len(batch), lat.n_plaquettes), dtype=bool)
        rows, cols = np.nonzero(excited)
        incident = lat.edge_plaquettes[cols]
        keep = incident >= 0
        covered[np.repeat(rows, keep.sum(axis=1)), incident[keep]] = True
        return np.all(covered == target[None, :], axis=1)

    mask: BatchFn = _support_matches
    observable: BatchFn = lambda batch: np.ones(len(batch))
    if variant is PhiVariant.NONTRIVIAL:
        loop_edges = np.array(sorted(loop.edge_ids), dtype=np.int64)
        touches_loop = bool(np.any(support_edges[loop_edges]))
        ids = np.array(sorted(plaquettes.plaquettes), dtype=np.int64)

        def _nontrivial(batch: FieldBatch) -> np.ndarray:
            nontrivial = excited_plaquette_mask(lat, params, batch.sigma)[:, ids].any(axis=1)
            return _support_matches(batch) & nontrivial & touches_loop

        mask = _nontrivial

    if variant is PhiVariant.WILSON:
        observable = wilson_observable(params, loop)

    oracle = ExactOracle(lat, params, budget=budget, chunk_size=chunk_size, map_fn=map_fn)
    result = oracle.reduce(space, observable, mask=mask)
    if result.weight == 0.0:
        return 0j if variant is PhiVariant.WILSON else 0.0
    normalizer = params.allowed_higgs.size
    value = result.total * np.exp(result.scale) / normalizer
    if variant is PhiVariant.WILSON:
        return complex(value)
    return float(value.real)


def contains_vortex(params: ModelParams, lat: Lattice, vortex: PlaquetteSet) -> Callable[[Configuration], bool]:
    """Predicate: ``vortex`` is one component of the low-disorder vortex decomposition."""

    def _predicate(cfg: Configuration) -> bool:
        support = support_low_disorder(cfg, params, lat)
        if not vortex.plaquettes <= support.plaquettes:
            return False
        return any(v.plaquettes.plaquettes == vortex.plaquettes for v in vortex_decomposition(support, lat))

    return _predicate


def contains_nontrivial_vortex(
    params: ModelParams, lat: Lattice, vortex: PlaquetteSet, loop: Loop
) -> Callable[[Configuration], bool]:
    """Predicate: ``vortex`` is in the decomposition and the configuration is Wilson-loop nontrivial on it.

    Nontrivial on V means E(V) meets the loop and some plaquette of V has
    rho(d sigma) != I.
    """
    in_decomposition = contains_vortex(params, lat, vortex)
    touches_loop = not vortex.edges.isdisjoint(loop.edge_ids)
    ids = np.array(sorted(vortex.plaquettes), dtype=np.int64)

    def _predicate(cfg: Configuration) -> bool:
        if not touches_loop:
            return False
        excited = excited_plaquette_mask(lat, params, cfg.sigma)[ids]
        return bool(excited.any()) and in_decomposition(cfg)

    return _predicate


def minimal_pattern(
    params: ModelParams,
    lat: Lattice,
    present: Sequence[int],
    absent: Sequence[int],
) -> Callable[[Configuration], bool]:
    """Predicate: P(e) is a minimal vortex of the decomposition for e in ``present`` and not for e in ``absent``."""
    for edge in (*present, *absent):
        minimal_vortex(lat, edge)

    def _predicate(cfg: Configuration) -> bool:
        found = {
            center
            for v in vortex_decomposition(support_low_disorder(cfg, params, lat), lat)
            if (center := minimal_center(lat, v.plaquettes)) is not None
        }
        return all(e in found for e in present) and not any(e in found for e in absent)

    return _predicate


def conditional_vortex_probability(
    params: ModelParams,
    lat: Lattice,
    vortex: PlaquetteSet,
    present: Sequence[int] = (),
    absent: Sequence[int] = (),
    **options: object,
) -> float:
    """P(vortex in decomposition | minimal vortices present on ``present``, absent on ``absent``)."""
    oracle = ExactOracle(lat, params, **options)
    return oracle.conditional_probability(
        per_configuration(contains_vortex(params, lat, vortex), dtype=bool),
        per_configuration(minimal_pattern(params, lat, present, absent), dtype=bool),
    )


def exact_kn_edge_law(params: ModelParams, lat: Lattice, edge: int, **options: object) -> np.ndarray:
    """Exact joint law m(phi_x, phi_y, eta_x, eta_y) of the endpoint fields of ``edge`` under K_N."""
    if params.kind is not ModelKind.K_N:
        raise ValidationError("the edge law is defined for the K_N model")
    oracle = ExactOracle(lat, params, **options)
    tail, head = int(lat.edge_tail[edge]), int(lat.edge_head[edge])
    k, n = params.higgs.order, params.group.order
    space = _full_space(lat, params)
    oracle.budget.check(space.size)
    bounds = [(s, min(s + oracle.chunk_size, space.size)) for s in range(0, space.size, oracle.chunk_size)]

    def _chunk(bound: tuple[int, int]) -> _Partial:
        batch = _decode(space, lat, params, *bound)
        logw = log_weights(lat, params, batch)
        scale = float(logw.max())
        w = np.exp(logw - scale)
        table = np.zeros((k, k, n, n))
        np.add.at(table, (batch.phi[:, tail], batch.phi[:, head], batch.eta[:, tail], batch.eta[:, head]), w)
        return _Partial(scale=scale, total=0j, weight=float(w.sum()), extra=table)

    combined = _combine(oracle.map_fn(_chunk, bounds))
    oracle.budget.record(space.size)
    return combined.extra / combined.weight


def exact_current_marginal(
    params: ModelParams,
    lat: Lattice,
    tolerance: float = 1e-14,
    budget: EnumerationBudget | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Marginal (sigma, phi) law from explicit summation over truncated currents.

    Returns the enumerated ``(sigma, phi)`` states (rows: edges then vertices)
    and their probabilities. Currents are independent across edges given
    ``(sigma, phi)``, so each edge's series is summed up to a cutoff that keeps
    the Poisson tail below ``tolerance``.
    """
    if params.kind is not ModelKind.RANDOM_CURRENT:
        raise ValidationError("current marginals need a random-current model")
    budget = budget or EnumerationBudget()
    peak = params.kappa * (params.edge_table.max() + params.offset_c)
    cutoff = current_cutoff(peak, tolerance)
    values = params.allowed_higgs
    budget.check(params.group.order**lat.n_edges * values.size**lat.n_vertices * (cutoff + 1))
    counts = np.arange(cutoff + 1)
    states: list[np.ndarray] = []
    log_masses: list[float] = []
    for sigma in itertools.product(range(params.group.order), repeat=lat.n_edges):
        sigma_row = np.array(sigma, dtype=np.int64)
        plaquettes = float(plaquette_term(lat, params, sigma_row))
        for phi_digits in itertools.product(range(values.size), repeat=lat.n_vertices):
            phi_row = values[list(phi_digits)].astype(np.int64)
            means = current_means(lat, params, sigma_row, phi_row)
            terms = xlogy(counts[None, :], means[:, None]) - gammaln(counts + 1)[None, :]
            states.append(np.concatenate([sigma_row, phi_row]))
            log_masses.append(plaquettes + float(logsumexp(terms, axis=1).sum()))
    logw = np.array(log_masses)
    w = np.exp(logw - logw.max())
    return np.array(states), w / w.sum()


def gibbs_state_law(params: ModelParams, lat: Lattice, **options: object) -> tuple[np.ndarray, np.ndarray]:
    """Every (sigma, phi) state with its Gibbs probability, in enumeration order."""
    oracle = ExactOracle(lat, params, **options)
    space = _full_space(lat, params)
    oracle.budget.check(space.size)
    batch = _decode(space, lat, params, 0, space.size)
    logw = log_weights(lat, params, batch)
    w = np.exp(logw - logw.max())
    return np.concatenate([batch.sigma, batch.phi], axis=1), w / w.sum()
