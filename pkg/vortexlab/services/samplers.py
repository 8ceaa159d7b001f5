"""Markov chains over gauge, Higgs, eta and current fields.

Sites are updated a class at a time: edges are split by axis and by the
parity of their other coordinates, vertices by checkerboard parity, so no
two sites of one class interact and a whole class moves in one vectorized
step. Every random draw comes from a Philox generator seeded per chain.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from vortexlab.domain.analysis import (
    DEFAULT_MAX_GROWTH,
    classify_vortex,
    count_minimal_on_loop,
    knot_decomposition,
    support_of,
    touches_boundary,
    validate_monochrome,
    vortex_decomposition,
)
from vortexlab.domain.hamiltonians import (
    choose_offset_c,
    current_means,
    edge_update_deltas,
    model_energy,
    vertex_update_deltas,
    wilson_loop_value,
)
from vortexlab.domain.lattice import Lattice, Loop
from vortexlab.domain.union_find import UnionFind
from vortexlab.domain.value_objects import (
    Configuration,
    ModelKind,
    ModelParams,
    SupportKind,
    UpdateRule,
)
from vortexlab.exceptions import MissingSeedError, ValidationError
from vortexlab.services.oracle import MapFn, sequential_map
from vortexlab.services.statistics import BatchEstimate, batch_means, binomial_error

logger = logging.getLogger(__name__)


def make_rng(seed: int | np.random.SeedSequence | None) -> np.random.Generator:
    if seed is None:
        raise MissingSeedError("sampling needs an explicit seed")
    return np.random.Generator(np.random.Philox(seed))


def chain_seeds(seed: int | None, chains: int) -> list[np.random.SeedSequence]:
    if seed is None:
        raise MissingSeedError("sampling needs an explicit seed")
    return np.random.SeedSequence(seed).spawn(chains)


@lru_cache(maxsize=16)
def edge_classes(lat: Lattice) -> tuple[np.ndarray, ...]:
    coords = lat.coords[lat.edge_tail]
    total = coords.sum(axis=1)
    parity = (total - coords[np.arange(lat.n_edges), lat.edge_axis]) % 2
    classes = []
    for axis in range(lat.d):
        for bit in (0, 1):
            members = np.nonzero((lat.edge_axis == axis) & (parity == bit))[0]
            if members.size:
                classes.append(members)
    return tuple(classes)


@lru_cache(maxsize=16)
def vertex_classes(lat: Lattice) -> tuple[np.ndarray, ...]:
    parity = lat.coords.sum(axis=1) % 2
    return tuple(members for bit in (0, 1) if (members := np.nonzero(parity == bit)[0]).size)


def as_random_current(params: ModelParams) -> ModelParams:
    """The random-current form of a model with the same couplings and f-table."""
    if params.kind is ModelKind.RANDOM_CURRENT:
        return params
    converted = ModelParams(
        kind=ModelKind.RANDOM_CURRENT,
        group=params.group,
        rep=params.rep,
        higgs=params.higgs,
        beta=params.beta,
        kappa=params.kappa,
        f_table=params.f_table,
        higgs_values=params.higgs_values,
    )
    return converted.with_offset(choose_offset_c(converted))


@dataclass(slots=True)
class ChainState:
    lat: Lattice
    params: ModelParams
    cfg: Configuration
    rng: np.random.Generator
    rule: UpdateRule = UpdateRule.METROPOLIS
    sweeps: int = 0
    proposed: int = 0
    accepted: int = 0

    @classmethod
    def start(
        cls,
        lat: Lattice,
        params: ModelParams,
        seed: int | np.random.SeedSequence | None,
        rule: UpdateRule | str = UpdateRule.METROPOLIS,
    ) -> "ChainState":
        rng = make_rng(seed)
        cfg = Configuration.ground(lat, params, with_currents=params.kind is ModelKind.RANDOM_CURRENT)
        cfg.phi[:] = params.allowed_higgs[0]
        state = cls(lat=lat, params=params, cfg=cfg, rng=rng, rule=UpdateRule(rule))
        if cfg.currents is not None:
            cfg.currents[:] = sample_currents(cfg, params, lat, rng)
        return state

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 1.0


def _choose(rng: np.random.Generator, deltas: np.ndarray) -> np.ndarray:
    """One categorical draw per row with probabilities proportional to exp(deltas)."""
    weights = np.exp(deltas - deltas.max(axis=1, keepdims=True))
    cumulative = np.cumsum(weights, axis=1)
    u = rng.random(deltas.shape[0])[:, None] * cumulative[:, -1:]
    return np.minimum((cumulative <= u).sum(axis=1), deltas.shape[1] - 1)


def _update_edges(state: ChainState, edges: np.ndarray) -> None:
    params, cfg, rng = state.params, state.cfg, state.rng
    if state.rule is UpdateRule.HEAT_BATH:
        candidates = np.broadcast_to(np.arange(params.group.order), (edges.size, params.group.order))
        deltas = edge_update_deltas(cfg, params, state.lat, edges, candidates)
        choice = _choose(rng, deltas)
        state.accepted += int(np.sum(choice != cfg.sigma[edges]))
        cfg.sigma[edges] = choice
    else:
        proposal = rng.integers(0, params.group.order, size=edges.size)
        deltas = edge_update_deltas(cfg, params, state.lat, edges, proposal[:, None])[:, 0]
        accept = np.log(rng.random(edges.size)) < deltas
        cfg.sigma[edges[accept]] = proposal[accept]
        state.accepted += int(accept.sum())
    state.proposed += int(edges.size)


def _update_vertices(state: ChainState, vertices: np.ndarray, field_name: str) -> None:
    params, cfg, rng = state.params, state.cfg, state.rng
    if field_name == "eta":
        values = np.arange(params.group.order)
        target = cfg.eta
    else:
        values = params.allowed_higgs
        target = cfg.phi
    if state.rule is UpdateRule.HEAT_BATH:
        candidates = np.broadcast_to(values, (vertices.size, values.size))
        deltas = vertex_update_deltas(cfg, params, state.lat, vertices, candidates, field=field_name)
        choice = values[_choose(rng, deltas)]
        state.accepted += int(np.sum(choice != target[vertices]))
        target[vertices] = choice
    else:
        proposal = values[rng.integers(0, values.size, size=vertices.size)]
        deltas = vertex_update_deltas(cfg, params, state.lat, vertices, proposal[:, None], field=field_name)[:, 0]
        accept = np.log(rng.random(vertices.size)) < deltas
        target[vertices[accept]] = proposal[accept]
        state.accepted += int(accept.sum())
    state.proposed += int(vertices.size)


def metropolis_sweep(state: ChainState) -> ChainState:
    """One pass over every site; random-current chains then redraw all currents."""
    params = state.params
    if params.kind is ModelKind.K_N:
        for vertices in vertex_classes(state.lat):
            _update_vertices(state, vertices, "eta")
        for vertices in vertex_classes(state.lat):
            _update_vertices(state, vertices, "phi")
    else:
        for edges in edge_classes(state.lat):
            _update_edges(state, edges)
        if params.kind.has_higgs and params.allowed_higgs.size > 1:
            for vertices in vertex_classes(state.lat):
                _update_vertices(state, vertices, "phi")
    if state.cfg.currents is not None:
        state.cfg.currents[:] = sample_currents(state.cfg, params, state.lat, state.rng)
    state.sweeps += 1
    return state


def sample_currents(cfg: Configuration, params: ModelParams, lat: Lattice, rng: np.random.Generator) -> np.ndarray:
    """Independent Poisson(kappa (g_e + c)) currents given (sigma, phi)."""
    if params.kappa == 0.0:
        return np.zeros(lat.n_edges, dtype=np.int64)
    return rng.poisson(current_means(lat, params, cfg.sigma, cfg.phi)).astype(np.int64)


@dataclass(frozen=True, slots=True)
class Schedule:
    measurements: int
    burn_in: int = 1000
    thinning: int = 10
    chains: int = 1
    rule: UpdateRule = UpdateRule.METROPOLIS
    batches: int = 16

    def __post_init__(self) -> None:
        if self.measurements < 1 or self.burn_in < 0 or self.thinning < 1 or self.chains < 1:
            raise ValueError("schedule needs positive measurements, thinning and chains")


@dataclass(slots=True)
class ObservableSeries:
    wilson: np.ndarray
    minimal_counts: np.ndarray
    energy: np.ndarray
    acceptance_rate: float = 1.0
    sweeps: int = 0
    checks: "SweepCounter | None" = None

    def __len__(self) -> int:
        return int(self.wilson.size)

    def estimates(self, batches: int = 16) -> dict[str, BatchEstimate]:
        return {
            "wilson": batch_means(self.wilson, batches),
            "minimal_count": batch_means(self.minimal_counts.astype(np.float64), batches),
            "energy": batch_means(self.energy, batches),
        }

    @classmethod
    def merge(cls, parts: Sequence["ObservableSeries"]) -> "ObservableSeries":
        counters = [part.checks for part in parts if part.checks is not None]
        return cls(
            wilson=np.concatenate([part.wilson for part in parts]),
            minimal_counts=np.concatenate([part.minimal_counts for part in parts]),
            energy=np.concatenate([part.energy for part in parts]),
            acceptance_rate=float(np.mean([part.acceptance_rate for part in parts])),
            sweeps=sum(part.sweeps for part in parts),
            checks=SweepCounter.merge(counters) if counters else None,
        )


def default_support_kind(params: ModelParams) -> SupportKind:
    if params.kind is ModelKind.RANDOM_CURRENT:
        return SupportKind.RANDOM_CURRENT
    if params.kind is ModelKind.GAUGED_OUT:
        return SupportKind.PURE_GAUGE
    return SupportKind.LOW_DISORDER


def measure(
    state: ChainState,
    loop: Loop,
    schedule: Schedule,
    *,
    support: SupportKind | None = None,
    on_sample: Callable[[ChainState], None] | None = None,
) -> ObservableSeries:
    if state.params.kind is ModelKind.K_N:
        raise ValidationError("Wilson loop measurements need a gauge field")
    kind = support or default_support_kind(state.params)
    for _ in range(schedule.burn_in):
        metropolis_sweep(state)
    wilson = np.empty(schedule.measurements, dtype=np.complex128)
    counts = np.empty(schedule.measurements, dtype=np.int64)
    energy = np.empty(schedule.measurements, dtype=np.float64)
    for sample in range(schedule.measurements):
        for _ in range(schedule.thinning):
            metropolis_sweep(state)
        wilson[sample] = wilson_loop_value(state.cfg.sigma, loop, state.params.rep)
        counts[sample] = count_minimal_on_loop(state.cfg, state.params, state.lat, loop, kind)
        energy[sample] = model_energy(state.cfg, state.params, state.lat)
        if on_sample is not None:
            on_sample(state)
    return ObservableSeries(
        wilson=wilson,
        minimal_counts=counts,
        energy=energy,
        acceptance_rate=state.acceptance_rate,
        sweeps=state.sweeps,
    )


def run_chains(
    lat: Lattice,
    params: ModelParams,
    loop: Loop,
    schedule: Schedule,
    seed: int | None,
    map_fn: MapFn = sequential_map,
    *,
    support: SupportKind | None = None,
    validate: bool = False,
    max_growth: int = DEFAULT_MAX_GROWTH,
) -> list[ObservableSeries]:
    """Independent chains, one spawned seed each, returned in chain order."""
    seeds = chain_seeds(seed, schedule.chains)
    kind = support or default_support_kind(params)

    def _run(chain_seed: np.random.SeedSequence) -> ObservableSeries:
        state = ChainState.start(lat, params, chain_seed, schedule.rule)
        counter = SweepCounter(support=kind, loop=loop, max_growth=max_growth) if validate else None
        series = measure(state, loop, schedule, support=kind, on_sample=counter)
        series.checks = counter
        return series

    series = map_fn(_run, seeds)
    logger.info("[sample] %d chains finished, %d measurements each", len(series), schedule.measurements)
    return series


@dataclass(frozen=True, slots=True)
class ClusterStats:
    labels: np.ndarray
    sizes: np.ndarray
    reaches_shell: np.ndarray | None = None
    eligible: np.ndarray | None = None

    @property
    def count(self) -> int:
        return int(self.sizes.size)


def current_cluster_stats(currents: np.ndarray, lat: Lattice, distance: int | None = None) -> ClusterStats:
    """Clusters of the activated-edge graph and, for ``distance`` K, which vertices reach their l-infinity K-shell.

    ``eligible`` marks vertices whose whole K-shell lies inside the lattice.
    """
    forest = UnionFind(lat.n_vertices)
    for edge in np.nonzero(currents > 0)[0]:
        forest.union(int(lat.edge_tail[edge]), int(lat.edge_head[edge]))
    components = forest.retrieve_components()
    labels = np.empty(lat.n_vertices, dtype=np.int64)
    for index, members in enumerate(components):
        labels[members] = index
    sizes = np.array([len(members) for members in components], dtype=np.int64)
    if distance is None:
        return ClusterStats(labels=labels, sizes=sizes)

    low = np.full((sizes.size, lat.d), np.iinfo(np.int64).max, dtype=np.int64)
    high = np.full((sizes.size, lat.d), -1, dtype=np.int64)
    np.minimum.at(low, labels, lat.coords)
    np.maximum.at(high, labels, lat.coords)
    reach = np.maximum(lat.coords - low[labels], high[labels] - lat.coords).max(axis=1)
    eligible = np.all((lat.coords >= distance) & (lat.coords <= np.asarray(lat.dims) - distance), axis=1)
    return ClusterStats(labels=labels, sizes=sizes, reaches_shell=reach >= distance, eligible=eligible)


@dataclass(frozen=True, slots=True)
class DecayRow:
    kappa: float
    distance: int
    probability: float
    stderr: float
    bond_probability: float
    bond_stderr: float


@dataclass(frozen=True, slots=True)
class DecayProfile:
    rows: tuple[DecayRow, ...]
    decay_rates: dict[float, float | None]
    bond_p: dict[float, float]


def bond_probability(params: ModelParams) -> float:
    """Edge activation probability of the dominating bond percolation, 1 - exp(-kappa (max g + c)).

    ``g`` is the paired edge table, whose maximum is the largest value of
    g_e + c over all fields. It is used in place of the looser
    ``2 * max f + c`` written with the single-orientation table: the paired
    table never exceeds twice the single one, so the bond law still
    dominates and ``p`` is never larger.
    """
    return float(1.0 - np.exp(-params.kappa * (params.edge_table.max() + params.offset_c)))


def fit_decay_rate(distances: Sequence[int], probabilities: Sequence[float]) -> float | None:
    """Least-squares -slope of log P against K; None with fewer than two positive points."""
    points = [(k, p) for k, p in zip(distances, probabilities) if p > 0]
    if len(points) < 2:
        return None
    ks, ps = zip(*points)
    slope = np.polyfit(np.asarray(ks, dtype=np.float64), np.log(np.asarray(ps)), 1)[0]
    return float(-slope)


def _shell_fraction(stats: ClusterStats) -> float:
    if stats.eligible is None or not stats.eligible.any():
        return 0.0
    return float(stats.reaches_shell[stats.eligible].mean())


def _profile_errors(fractions: np.ndarray, eligible: int) -> tuple[float, float]:
    mean = float(fractions.mean())
    if fractions.size >= 16:
        return mean, batch_means(fractions, 16).stderr
    return mean, binomial_error(mean, fractions.size * max(eligible, 1))


def connectivity_decay_profile(
    lat: Lattice,
    params: ModelParams,
    kappas: Sequence[float],
    distances: Sequence[int],
    samples: int,
    schedule: Schedule,
    seed: int | None,
    map_fn: MapFn = sequential_map,
) -> DecayProfile:
    """P(v connected to its K-shell by activated edges), for each kappa and K, with a bond-percolation comparator."""
    seeds = chain_seeds(seed, len(kappas))
    base = as_random_current(params)

    def _run(job: tuple[float, np.random.SeedSequence]) -> list[DecayRow]:
        kappa, job_seed = job
        model = base.with_couplings(kappa=kappa)
        model = model.with_offset(choose_offset_c(model))
        chain_seed, bond_seed = job_seed.spawn(2)
        state = ChainState.start(lat, model, chain_seed, schedule.rule)
        for _ in range(schedule.burn_in):
            metropolis_sweep(state)
        fractions = np.zeros((samples, len(distances)))
        for sample in range(samples):
            for _ in range(schedule.thinning):
                metropolis_sweep(state)
            for column, distance in enumerate(distances):
                fractions[sample, column] = _shell_fraction(current_cluster_stats(state.cfg.currents, lat, distance))

        p = bond_probability(model)
        bond_rng = make_rng(bond_seed)
        bond_fractions = np.zeros((samples, len(distances)))
        for sample in range(samples):
            active = (bond_rng.random(lat.n_edges) < p).astype(np.int64)
            for column, distance in enumerate(distances):
                bond_fractions[sample, column] = _shell_fraction(current_cluster_stats(active, lat, distance))

        rows = []
        for column, distance in enumerate(distances):
            eligible = int(current_cluster_stats(np.zeros(lat.n_edges), lat, distance).eligible.sum())
            probability, stderr = _profile_errors(fractions[:, column], eligible)
            bond_mean, bond_err = _profile_errors(bond_fractions[:, column], eligible)
            rows.append(DecayRow(float(kappa), int(distance), probability, stderr, bond_mean, bond_err))
        return rows

    results = map_fn(_run, list(zip(kappas, seeds)))
    rows = tuple(row for block in results for row in block)
    rates = {
        float(kappa): fit_decay_rate(
            [row.distance for row in block],
            [row.probability for row in block],
        )
        for kappa, block in zip(kappas, results)
    }
    bond = {float(kappa): bond_probability(as_random_current(base.with_couplings(kappa=kappa))) for kappa in kappas}
    logger.info("[perc] profile over %d couplings and %d distances", len(kappas), len(distances))
    return DecayProfile(rows=rows, decay_rates=rates, bond_p=bond)


def symmetrize_edge_law(table: np.ndarray, params: ModelParams) -> np.ndarray:
    """Average m(phi1, phi2, eta1, eta2) over the global eta right-shift and phi shift orbits."""
    k, n = params.higgs.order, params.group.order
    result = np.zeros_like(table, dtype=np.float64)
    h = np.arange(k)
    g = np.arange(n)
    for shift in range(k):
        for right in range(n):
            moved_h = (h + shift) % k
            moved_g = params.group.table[g, right]
            result += table[np.ix_(moved_h, moved_h, moved_g, moved_g)]
    result /= k * n
    return result / result.sum()


def magnetization_estimate(
    lat: Lattice,
    params: ModelParams,
    edge: int,
    samples: int,
    schedule: Schedule,
    seed: int | None,
) -> np.ndarray:
    """Empirical symmetrized law of (phi_x, phi_y, eta_x, eta_y) on ``edge`` under K_N."""
    if params.kind is not ModelKind.K_N:
        raise ValidationError("magnetization tables are sampled from the K_N model")
    state = ChainState.start(lat, params, seed, schedule.rule)
    tail, head = int(lat.edge_tail[edge]), int(lat.edge_head[edge])
    k, n = params.higgs.order, params.group.order
    table = np.zeros((k, k, n, n))
    for _ in range(schedule.burn_in):
        metropolis_sweep(state)
    for _ in range(samples):
        for _ in range(schedule.thinning):
            metropolis_sweep(state)
        cfg = state.cfg
        table[cfg.phi[tail], cfg.phi[head], cfg.eta[tail], cfg.eta[head]] += 1.0
    return symmetrize_edge_law(table / samples, params)


@dataclass(slots=True)
class SweepCounter:
    """Tally of per-sample validator results, fed through ``measure(on_sample=...)``.

    Every sample's support is checked for monochrome complement regions and,
    away from the lattice boundary, for vortices smaller than a minimal one.
    With a loop, vortices are also classified and grouped into knots.
    """

    support: SupportKind
    loop: Loop | None = None
    max_growth: int = DEFAULT_MAX_GROWTH
    samples: int = 0
    violations: int = 0
    small_vortices: int = 0
    knots: int = 0
    loop_knots: int = 0
    classes: dict[str, int] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __call__(self, state: ChainState) -> None:
        lat, params, cfg = state.lat, state.params, state.cfg
        plaquettes = support_of(cfg, params, lat, self.support)
        self.samples += 1
        if self.support is SupportKind.LOW_DISORDER:
            report = validate_monochrome(cfg, params, lat, plaquettes)
            if not report.ok:
                self.violations += 1
                self.notes.extend(report.violations[:1])
        vortices = vortex_decomposition(plaquettes, lat)
        floor = 2 * (lat.d - 1)
        for vortex in vortices:
            # G2 is empty in the plane, so every plaquette is its own vortex there
            if lat.d > 2 and vortex.pair_count < floor and not touches_boundary(lat, vortex.plaquettes):
                self.small_vortices += 1
                self.notes.append(f"vortex of {vortex.pair_count} plaquettes at sweep {state.sweeps}")
        if self.loop is not None:
            for vortex in vortices:
                label = classify_vortex(vortex, cfg, params, lat, self.loop).value
                self.classes[label] = self.classes.get(label, 0) + 1
            knots = knot_decomposition(vortices, lat, self.loop, max_growth=self.max_growth)
            self.knots += len(knots)
            self.loop_knots += sum(1 for knot in knots if knot.separated_from_loop is False)

    @classmethod
    def merge(cls, parts: Sequence["SweepCounter"]) -> "SweepCounter":
        merged = cls(support=parts[0].support, loop=parts[0].loop, max_growth=parts[0].max_growth)
        for part in parts:
            merged.samples += part.samples
            merged.violations += part.violations
            merged.small_vortices += part.small_vortices
            merged.knots += part.knots
            merged.loop_knots += part.loop_knots
            for label, count in part.classes.items():
                merged.classes[label] = merged.classes.get(label, 0) + count
            merged.notes.extend(part.notes)
        return merged
