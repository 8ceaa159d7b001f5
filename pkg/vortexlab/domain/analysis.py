"""Supports, vortex and knot decompositions, and structural validators."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from vortexlab.domain.groups import plaquette_products
from vortexlab.domain.lattice import Lattice, Loop, PlaquetteSet, g2_adjacency, plaquette_set
from vortexlab.domain.union_find import UnionFind
from vortexlab.domain.value_objects import Configuration, ModelParams, SupportKind, VortexClass
from vortexlab.exceptions import BudgetExceededError, ValidationError

logger = logging.getLogger(__name__)

DEFAULT_MAX_GROWTH = 3
DEFAULT_FLAG_SIZE = 20
DEFAULT_MAX_ENUMERATION_PAIRS = 8


@dataclass(frozen=True, slots=True)
class Vortex:
    plaquettes: PlaquetteSet

    @property
    def pair_count(self) -> int:
        return len(self.plaquettes)

    @property
    def oriented_count(self) -> int:
        return 2 * len(self.plaquettes)

    @property
    def first_plaquette(self) -> int:
        return min(self.plaquettes.plaquettes)


@dataclass(frozen=True, slots=True)
class Box:
    lower: tuple[int, ...]
    upper: tuple[int, ...]

    def strictly_contains(self, points: np.ndarray) -> np.ndarray:
        return np.all((points > np.asarray(self.lower)) & (points < np.asarray(self.upper)), axis=-1)

    def closed_contains(self, points: np.ndarray) -> np.ndarray:
        return np.all((points >= np.asarray(self.lower)) & (points <= np.asarray(self.upper)), axis=-1)


@dataclass(frozen=True, slots=True)
class Knot:
    vortices: tuple[Vortex, ...]
    covering_side: int
    separating_box: Box | None = None
    separated_from_loop: bool | None = None

    @property
    def plaquettes(self) -> PlaquetteSet:
        merged = self.vortices[0].plaquettes
        for vortex in self.vortices[1:]:
            merged = merged.union(vortex.plaquettes)
        return merged

    @property
    def pair_count(self) -> int:
        return sum(vortex.pair_count for vortex in self.vortices)


@dataclass(frozen=True, slots=True)
class MonochromeReport:
    violations: tuple[str, ...]
    component_count: int

    @property
    def ok(self) -> bool:
        return not self.violations


def excited_plaquette_mask(lat: Lattice, params: ModelParams, sigma: np.ndarray) -> np.ndarray:
    """True where psi_p(sigma) != psi_p(1), i.e. rho(d sigma) != I."""
    kernel = np.zeros(params.group.order, dtype=bool)
    kernel[params.rep.kernel()] = True
    return ~kernel[plaquette_products(lat, params.group, sigma)]


def excited_edge_mask(lat: Lattice, params: ModelParams, cfg: Configuration) -> np.ndarray:
    gauge = cfg.sigma != params.group.identity
    higgs = cfg.phi[lat.edge_tail] != cfg.phi[lat.edge_head]
    return gauge | higgs


def _plaquettes_of_edges(lat: Lattice, edge_mask: np.ndarray) -> np.ndarray:
    incident = lat.edge_plaquettes[edge_mask]
    return np.unique(incident[incident >= 0])


def support_low_disorder(cfg: Configuration, params: ModelParams, lat: Lattice) -> PlaquetteSet:
    return plaquette_set(lat, _plaquettes_of_edges(lat, excited_edge_mask(lat, params, cfg)))


def support_pure_gauge(sigma: np.ndarray, params: ModelParams, lat: Lattice) -> PlaquetteSet:
    return plaquette_set(lat, np.nonzero(excited_plaquette_mask(lat, params, sigma))[0])


def support_random_current(sigma: np.ndarray, currents: np.ndarray, params: ModelParams, lat: Lattice) -> PlaquetteSet:
    excited = excited_plaquette_mask(lat, params, sigma)
    touched = np.zeros(lat.n_vertices, dtype=bool)
    active = currents > 0
    touched[lat.edge_tail[active]] = True
    touched[lat.edge_head[active]] = True
    excited |= touched[lat.plaquette_vertices].any(axis=1)
    return plaquette_set(lat, np.nonzero(excited)[0])


def support_of(cfg: Configuration, params: ModelParams, lat: Lattice, kind: SupportKind | str) -> PlaquetteSet:
    kind = SupportKind(kind)
    if kind is SupportKind.LOW_DISORDER:
        return support_low_disorder(cfg, params, lat)
    if kind is SupportKind.PURE_GAUGE:
        return support_pure_gauge(cfg.sigma, params, lat)
    if cfg.currents is None:
        raise ValidationError("random-current support needs a current field")
    return support_random_current(cfg.sigma, cfg.currents, params, lat)


def touches_boundary(lat: Lattice, plaquettes: PlaquetteSet) -> bool:
    if not plaquettes.vertices:
        return False
    return bool(lat.boundary_vertex_mask()[sorted(plaquettes.vertices)].any())


def vortex_decomposition(plaquettes: PlaquetteSet, lat: Lattice) -> list[Vortex]:
    ids = np.array(sorted(plaquettes.plaquettes), dtype=np.int64)
    if ids.size == 0:
        return []
    graph = g2_adjacency(lat)[ids][:, ids]
    _, labels = connected_components(graph, directed=False)
    groups: dict[int, list[int]] = {}
    for plaquette, label in zip(ids.tolist(), labels.tolist()):
        groups.setdefault(label, []).append(plaquette)
    vortices = [Vortex(plaquette_set(lat, members)) for members in groups.values()]
    return sorted(vortices, key=lambda vortex: vortex.first_plaquette)


def minimal_center(lat: Lattice, plaquettes: PlaquetteSet) -> int | None:
    """The edge e with plaquettes == P(e), if there is one."""
    if len(plaquettes) != 2 * (lat.d - 1):
        return None
    common: set[int] | None = None
    for plaquette in plaquettes.plaquettes:
        edges = set(lat.plaquette_edges[plaquette].tolist())
        common = edges if common is None else common & edges
    if not common or len(common) != 1:
        return None
    edge = next(iter(common))
    if lat.incident_plaquettes(edge).size != 2 * (lat.d - 1):
        return None
    return edge


def _vertex_points(lat: Lattice, vertices: Iterable[int]) -> np.ndarray:
    ids = np.fromiter(vertices, dtype=np.int64)
    return lat.coords[ids] if ids.size else np.zeros((0, lat.d), dtype=np.int64)


def find_separating_box(
    lat: Lattice,
    inner: Iterable[int],
    outer: Iterable[int],
    max_growth: int = DEFAULT_MAX_GROWTH,
) -> Box | None:
    """Box grown from the bounding box of ``inner`` holding it strictly inside while ``outer`` stays clear."""
    inner_points = _vertex_points(lat, inner)
    outer_points = _vertex_points(lat, outer)
    if inner_points.shape[0] == 0:
        return None
    low = inner_points.min(axis=0)
    high = inner_points.max(axis=0)
    limit = np.asarray(lat.dims)
    for growth in range(max_growth + 1):
        box = Box(
            lower=tuple(int(v) for v in np.maximum(low - growth, 0)),
            upper=tuple(int(v) for v in np.minimum(high + growth, limit)),
        )
        if not box.strictly_contains(inner_points).all():
            continue
        if outer_points.shape[0] and box.closed_contains(outer_points).any():
            continue
        return box
    return None


def is_well_separated(
    first: PlaquetteSet,
    second: PlaquetteSet,
    lat: Lattice,
    *,
    max_growth: int = DEFAULT_MAX_GROWTH,
    flag_size: int = DEFAULT_FLAG_SIZE,
) -> Box | None:
    if first.plaquettes & second.plaquettes:
        raise ValidationError("well-separation needs disjoint plaquette sets")
    box = find_separating_box(lat, first.vertices, second.vertices, max_growth)
    if box is None and len(first) + len(second) > flag_size:
        logger.warning(
            "[!] No separating box found for sets of %d and %d plaquettes; treated as not separated",
            len(first),
            len(second),
        )
    return box


def _covering_side(lat: Lattice, plaquettes: PlaquetteSet) -> int:
    points = _vertex_points(lat, plaquettes.vertices)
    if points.shape[0] == 0:
        return 0
    return int((points.max(axis=0) - points.min(axis=0)).max())


def _merge(vortices: Sequence[Vortex]) -> PlaquetteSet:
    merged = vortices[0].plaquettes
    for vortex in vortices[1:]:
        merged = merged.union(vortex.plaquettes)
    return merged


def knot_decomposition(
    vortices: Sequence[Vortex],
    lat: Lattice,
    loop: Loop | None = None,
    *,
    max_growth: int = DEFAULT_MAX_GROWTH,
) -> list[Knot]:
    """Group vortices into knots, minimal vortices first as singletons.

    Knots come in sequential order: each knot's box separates it from every
    knot after it. When no remaining group separates from the rest, the
    rest becomes one knot.
    """
    if not vortices:
        return []
    ordered = sorted(vortices, key=lambda vortex: vortex.first_plaquette)
    loop_vertices = set(loop.vertices) if loop is not None else None

    def _knot(members: Sequence[Vortex], box: Box | None) -> Knot:
        plaquettes = _merge(members)
        separated = None
        if loop_vertices is not None:
            separated = find_separating_box(lat, plaquettes.vertices, loop_vertices, max_growth) is not None
        return Knot(tuple(members), _covering_side(lat, plaquettes), box, separated)

    knots: list[Knot] = []
    pool: list[Vortex] = []
    for index, vortex in enumerate(ordered):
        if minimal_center(lat, vortex.plaquettes) is None:
            pool.append(vortex)
            continue
        others = [other for position, other in enumerate(ordered) if position != index]
        outside = _merge(others).vertices if others else frozenset()
        box = find_separating_box(lat, vortex.plaquettes.vertices, outside, max_growth)
        if box is None:
            pool.append(vortex)
        else:
            knots.append(_knot([vortex], box))

    groups: list[list[Vortex]] = [[vortex] for vortex in pool]
    merged = True
    while merged:
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                first, second = _merge(groups[i]), _merge(groups[j])
                if (find_separating_box(lat, first.vertices, second.vertices, max_growth) is None
                        and find_separating_box(lat, second.vertices, first.vertices, max_growth) is None):
                    groups[i] = groups[i] + groups[j]
                    del groups[j]
                    merged = True
                    break
            if merged:
                break

    while groups:
        chosen = None
        for index, members in enumerate(groups):
            rest = [vortex for position, group in enumerate(groups) if position != index for vortex in group]
            outside = _merge(rest).vertices if rest else frozenset()
            box = find_separating_box(lat, _merge(members).vertices, outside, max_growth)
            if box is not None or not rest:
                chosen = (index, box)
                break
        if chosen is None:
            remaining = [vortex for group in groups for vortex in group]
            knots.append(_knot(sorted(remaining, key=lambda vortex: vortex.first_plaquette), None))
            break
        index, box = chosen
        knots.append(_knot(groups.pop(index), box))
    return knots


def classify_vortex(
    vortex: Vortex,
    cfg: Configuration,
    params: ModelParams,
    lat: Lattice,
    loop: Loop,
) -> VortexClass:
    loop_edges = loop.edge_ids
    if not (vortex.plaquettes.edges & loop_edges):
        return VortexClass.NON_CONTRIBUTING
    center = minimal_center(lat, vortex.plaquettes)
    if center is not None:
        if center in loop_edges and cfg.sigma[center] != params.group.identity:
            return VortexClass.MINIMAL_ON_LOOP
        if center not in loop_edges:
            return VortexClass.NON_CONTRIBUTING
    ids = np.array(sorted(vortex.plaquettes.plaquettes), dtype=np.int64)
    if excited_plaquette_mask(lat, params, cfg.sigma)[ids].any():
        return VortexClass.WILSON_NONTRIVIAL
    return VortexClass.WILSON_TRIVIAL


def count_minimal_on_loop(
    cfg: Configuration,
    params: ModelParams,
    lat: Lattice,
    loop: Loop,
    kind: SupportKind | str = SupportKind.LOW_DISORDER,
) -> int:
    loop_edges = loop.edge_ids
    count = 0
    for vortex in vortex_decomposition(support_of(cfg, params, lat, kind), lat):
        center = minimal_center(lat, vortex.plaquettes)
        if center is not None and center in loop_edges and cfg.sigma[center] != params.group.identity:
            count += 1
    return count


def validate_monochrome(cfg: Configuration, params: ModelParams, lat: Lattice, plaquettes: PlaquetteSet) -> MonochromeReport:
    """Check that the complement of V(P) splits into single-charge regions.

    Reports components carrying two charges or a non-identity gauge value,
    boundary vertices of P disagreeing with the component they touch, and
    excited edges whose plaquettes are not all in P.
    """
    violations: list[str] = []
    in_support = np.zeros(lat.n_vertices, dtype=bool)
    in_support[sorted(plaquettes.vertices)] = True
    support_edges = np.zeros(lat.n_edges, dtype=bool)
    support_edges[sorted(plaquettes.edges)] = True

    forest = UnionFind(lat.n_vertices)
    outside = ~in_support[lat.edge_tail] & ~in_support[lat.edge_head]
    for edge in np.nonzero(outside)[0]:
        forest.union(int(lat.edge_tail[edge]), int(lat.edge_head[edge]))
        if cfg.sigma[edge] != params.group.identity:
            violations.append(f"edge {int(edge)} outside the support carries a non-identity gauge value")

    charges: dict[int, int] = {}
    roots: set[int] = set()
    for vertex in np.nonzero(~in_support)[0]:
        root = forest.find_parent(int(vertex))
        roots.add(root)
        charge = int(cfg.phi[vertex])
        if charges.setdefault(root, charge) != charge:
            violations.append(f"component of vertex {int(vertex)} carries more than one charge")

    touching = np.nonzero(~support_edges & (in_support[lat.edge_tail] ^ in_support[lat.edge_head]))[0]
    for edge in touching:
        tail, head = int(lat.edge_tail[edge]), int(lat.edge_head[edge])
        inner, outer = (tail, head) if in_support[tail] else (head, tail)
        if int(cfg.phi[inner]) != charges.get(forest.find_parent(outer)):
            violations.append(f"vertex {inner} of V(P) disagrees with its neighbouring component")

    excited = excited_edge_mask(lat, params, cfg)
    for edge in np.nonzero(excited)[0]:
        if not set(lat.incident_plaquettes(int(edge)).tolist()) <= plaquettes.plaquettes:
            violations.append(f"excited edge {int(edge)} is not covered by the support")

    # a component may be reported once per offending vertex
    unique = tuple(dict.fromkeys(violations))
    return MonochromeReport(violations=unique, component_count=len(roots))


def external_boundary(region: Iterable[int], lat: Lattice) -> PlaquetteSet:
    inside = np.zeros(lat.n_vertices, dtype=bool)
    vertices = np.fromiter((int(v) for v in region), dtype=np.int64)
    if vertices.size == 0:
        return plaquette_set(lat, [])
    inside[vertices] = True
    boundary = lat.boundary_vertex_mask()
    if np.any(inside & boundary):
        raise ValidationError("region touches the lattice boundary")

    outer = np.zeros(lat.n_vertices, dtype=bool)
    seeds = np.nonzero(boundary)[0]
    outer[seeds] = True
    queue = deque(seeds.tolist())
    while queue:
        vertex = queue.popleft()
        for edge in lat.incident_edges(vertex):
            other = int(lat.edge_head[edge]) if int(lat.edge_tail[edge]) == vertex else int(lat.edge_tail[edge])
            if not outer[other] and not inside[other]:
                outer[other] = True
                queue.append(other)

    tail_in, head_in = inside[lat.edge_tail], inside[lat.edge_head]
    crossing = (tail_in & outer[lat.edge_head]) | (head_in & outer[lat.edge_tail])
    return plaquette_set(lat, _plaquettes_of_edges(lat, crossing))


def enumerate_vortices_containing(
    lat: Lattice,
    plaquette: int,
    k: int,
    *,
    max_pairs: int = DEFAULT_MAX_ENUMERATION_PAIRS,
) -> int:
    """Number of G2-connected sets of ``k`` plaquettes containing ``plaquette``."""
    if k < 1:
        raise ValidationError("vortex size must be at least one plaquette")
    if k > max_pairs:
        raise BudgetExceededError(f"exhaustive vortex enumeration is capped at {max_pairs} plaquettes, got {k}")
    graph = g2_adjacency(lat)
    indptr, indices = graph.indptr, graph.indices
    seen = {plaquette}
    count = 0

    def _grow(untried: list[int], size: int) -> None:
        nonlocal count
        while untried:
            cell = untried.pop()
            if size + 1 == k:
                count += 1
                continue
            fresh = [int(n) for n in indices[indptr[cell]:indptr[cell + 1]] if int(n) not in seen]
            seen.update(fresh)
            _grow(untried + fresh, size + 1)
            seen.difference_update(fresh)

    _grow([plaquette], 0)
    return count
