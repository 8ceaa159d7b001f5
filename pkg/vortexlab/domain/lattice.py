"""Cell complex of a finite box lattice ``[0, L_1] x ... x [0, L_d]``.

Vertices, unoriented edges and unoriented plaquettes are integer ids ordered
lexicographically by base coordinate and then by axis (or axis pair). An
oriented edge is the pair ``(edge_id, +1 | -1)``; ``-1`` traverses the edge from
head to tail. The positive orientation of a plaquette spanned by axes
``i < j`` runs ``base -> base+e_i -> base+e_i+e_j -> base+e_j -> base``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from math import prod
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

import numpy as np
from scipy import sparse

from vortexlab.domain.union_find import UnionFind
from vortexlab.exceptions import ConfigurationError, ValidationError

if TYPE_CHECKING:
    from vortexlab.domain.groups import FiniteGroup

OrientedEdge = tuple[int, int]

MIN_DIMENSION = 2
MAX_DIMENSION = 4


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def _padded_incidence(keys: np.ndarray, values: np.ndarray, n_keys: int, width: int) -> np.ndarray:
    order = np.argsort(keys, kind="stable")
    counts = np.bincount(keys, minlength=n_keys)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    slots = np.arange(keys.size) - np.repeat(starts, counts)
    table = np.full((n_keys, width), -1, dtype=np.int64)
    table[keys[order], slots] = values[order]
    return table


@dataclass(frozen=True, slots=True, eq=False)
class Lattice:
    dims: tuple[int, ...]
    coords: np.ndarray
    strides: np.ndarray
    edge_tail: np.ndarray
    edge_head: np.ndarray
    edge_axis: np.ndarray
    edge_lookup: np.ndarray
    plaquette_edges: np.ndarray
    plaquette_signs: np.ndarray
    plaquette_axes: np.ndarray
    plaquette_vertices: np.ndarray
    plaquette_lookup: np.ndarray
    cube_plaquettes: np.ndarray
    edge_plaquettes: np.ndarray
    edge_plaquette_pos: np.ndarray
    vertex_edges: np.ndarray
    axis_pairs: tuple[tuple[int, int], ...] = field(default=())

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def n_vertices(self) -> int:
        return int(self.coords.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edge_tail.shape[0])

    @property
    def n_plaquettes(self) -> int:
        return int(self.plaquette_edges.shape[0])

    @property
    def n_cubes(self) -> int:
        return int(self.cube_plaquettes.shape[0])

    def vertex_at(self, coord: Sequence[int]) -> int:
        point = np.asarray(coord, dtype=np.int64)
        if point.shape != (self.d,) or np.any(point < 0) or np.any(point > np.asarray(self.dims)):
            raise ValidationError(f"vertex {tuple(coord)} lies outside lattice {self.dims}")
        return int(point @ self.strides)

    def edge_at(self, base: Sequence[int] | int, axis: int) -> int:
        vertex = base if isinstance(base, (int, np.integer)) else self.vertex_at(base)
        edge = int(self.edge_lookup[int(vertex), axis])
        if edge < 0:
            raise ValidationError(f"no edge leaves vertex {int(vertex)} along axis {axis}")
        return edge

    def plaquette_at(self, base: Sequence[int] | int, axes: tuple[int, int]) -> int:
        vertex = base if isinstance(base, (int, np.integer)) else self.vertex_at(base)
        i, j = sorted(axes)
        plaquette = int(self.plaquette_lookup[int(vertex), self.axis_pairs.index((i, j))])
        if plaquette < 0:
            raise ValidationError(f"no plaquette at vertex {int(vertex)} spanning axes {(i, j)}")
        return plaquette

    def centered_coordinates(self, vertex: int) -> tuple[int, ...]:
        """Coordinates shifted so the box is centered at the origin."""
        return tuple(int(c - L // 2) for c, L in zip(self.coords[vertex], self.dims))

    def oriented_endpoints(self, edge: OrientedEdge) -> tuple[int, int]:
        edge_id, sign = edge
        if sign > 0:
            return int(self.edge_tail[edge_id]), int(self.edge_head[edge_id])
        return int(self.edge_head[edge_id]), int(self.edge_tail[edge_id])

    def incident_plaquettes(self, edge: int) -> np.ndarray:
        row = self.edge_plaquettes[edge]
        return row[row >= 0]

    def incident_edges(self, vertex: int) -> np.ndarray:
        row = self.vertex_edges[vertex]
        return row[row >= 0]

    def is_boundary_vertex(self, vertex: int) -> bool:
        point = self.coords[vertex]
        return bool(np.any(point == 0) or np.any(point == np.asarray(self.dims)))

    def boundary_vertex_mask(self) -> np.ndarray:
        return np.any((self.coords == 0) | (self.coords == np.asarray(self.dims)), axis=1)


def build_lattice(dims: Sequence[int]) -> Lattice:
    dims = tuple(int(side) for side in dims)
    d = len(dims)
    if not MIN_DIMENSION <= d <= MAX_DIMENSION:
        raise ConfigurationError(f"lattice dimension must lie in [{MIN_DIMENSION}, {MAX_DIMENSION}], got {d}")
    if any(side < 1 for side in dims):
        raise ConfigurationError(f"all side lengths must be positive, got {dims}")

    shape = tuple(side + 1 for side in dims)
    n_vertices = prod(shape)
    coords = np.array(np.unravel_index(np.arange(n_vertices), shape), dtype=np.int64).T
    strides = np.array([prod(shape[a + 1:]) for a in range(d)], dtype=np.int64)
    upper = np.asarray(dims, dtype=np.int64)

    can_step = coords < upper
    edge_lookup = np.full((n_vertices, d), -1, dtype=np.int64)
    edge_lookup[can_step] = np.arange(int(can_step.sum()))
    edge_tail, edge_axis = np.nonzero(can_step)
    edge_head = edge_tail + strides[edge_axis]

    axis_pairs = tuple(combinations(range(d), 2))
    pair_array = np.array(axis_pairs, dtype=np.int64)
    can_span = np.stack([can_step[:, i] & can_step[:, j] for i, j in axis_pairs], axis=1)
    plaquette_lookup = np.full((n_vertices, len(axis_pairs)), -1, dtype=np.int64)
    plaquette_lookup[can_span] = np.arange(int(can_span.sum()))
    base, pair_index = np.nonzero(can_span)
    ax_i = pair_array[pair_index, 0]
    ax_j = pair_array[pair_index, 1]
    corner_i = base + strides[ax_i]
    corner_j = base + strides[ax_j]
    plaquette_edges = np.stack(
        [
            edge_lookup[base, ax_i],
            edge_lookup[corner_i, ax_j],
            edge_lookup[corner_j, ax_i],
            edge_lookup[base, ax_j],
        ],
        axis=1,
    )
    n_plaquettes = plaquette_edges.shape[0]
    plaquette_signs = np.tile(np.array([1, 1, -1, -1], dtype=np.int64), (n_plaquettes, 1))
    plaquette_vertices = np.stack([base, corner_i, corner_i + strides[ax_j], corner_j], axis=1)

    cube_rows: list[np.ndarray] = []
    for i, j, k in combinations(range(d), 3):
        cube_base = np.nonzero(can_step[:, i] & can_step[:, j] & can_step[:, k])[0]
        faces = []
        for (a, b), third in (((i, j), k), ((i, k), j), ((j, k), i)):
            slot = axis_pairs.index((a, b))
            faces.append(plaquette_lookup[cube_base, slot])
            faces.append(plaquette_lookup[cube_base + strides[third], slot])
        cube_rows.append(np.stack(faces, axis=1))
    if cube_rows:
        cubes = np.concatenate(cube_rows, axis=0)
        # lexicographic by base vertex, then axis triple
        cube_base_vertex = plaquette_vertices[cubes[:, 0], 0]
        cubes = cubes[np.argsort(cube_base_vertex, kind="stable")]
    else:
        cubes = np.zeros((0, 6), dtype=np.int64)

    flat_edges = plaquette_edges.ravel()
    owner = np.repeat(np.arange(n_plaquettes), 4)
    position = np.tile(np.arange(4), n_plaquettes)
    width = 2 * (d - 1)
    n_edges = edge_tail.shape[0]
    edge_plaquettes = _padded_incidence(flat_edges, owner, n_edges, width)
    edge_plaquette_pos = _padded_incidence(flat_edges, position, n_edges, width)

    endpoints = np.concatenate([edge_tail, edge_head])
    edge_ids = np.concatenate([np.arange(n_edges), np.arange(n_edges)])
    vertex_edges = _padded_incidence(endpoints, edge_ids, n_vertices, 2 * d)
    # ascending edge ids per row, padding last
    padding = np.iinfo(np.int64).max
    vertex_edges = np.sort(np.where(vertex_edges < 0, padding, vertex_edges), axis=1)
    vertex_edges[vertex_edges == padding] = -1

    return Lattice(
        dims=dims,
        coords=_frozen(coords),
        strides=_frozen(strides),
        edge_tail=_frozen(edge_tail.astype(np.int64)),
        edge_head=_frozen(edge_head.astype(np.int64)),
        edge_axis=_frozen(edge_axis.astype(np.int64)),
        edge_lookup=_frozen(edge_lookup),
        plaquette_edges=_frozen(plaquette_edges),
        plaquette_signs=_frozen(plaquette_signs),
        plaquette_axes=_frozen(np.stack([ax_i, ax_j], axis=1)),
        plaquette_vertices=_frozen(plaquette_vertices),
        plaquette_lookup=_frozen(plaquette_lookup),
        cube_plaquettes=_frozen(cubes),
        edge_plaquettes=_frozen(edge_plaquettes),
        edge_plaquette_pos=_frozen(edge_plaquette_pos),
        vertex_edges=_frozen(vertex_edges),
        axis_pairs=axis_pairs,
    )


@lru_cache(maxsize=16)
def g2_adjacency(lat: Lattice) -> sparse.csr_matrix:
    """Plaquette graph G2: two plaquettes are adjacent iff a 3-cell has both as faces."""
    n = lat.n_plaquettes
    if lat.n_cubes == 0:
        return sparse.csr_matrix((n, n), dtype=bool)
    rows, cols = [], []
    for a, b in combinations(range(6), 2):
        rows.append(lat.cube_plaquettes[:, a])
        cols.append(lat.cube_plaquettes[:, b])
    row = np.concatenate(rows + cols)
    col = np.concatenate(cols + rows)
    graph = sparse.coo_matrix((np.ones(row.size, dtype=bool), (row, col)), shape=(n, n)).tocsr()
    graph.sum_duplicates()
    graph.data[:] = True
    return graph


@dataclass(frozen=True, slots=True)
class PlaquetteSet:
    """Unoriented plaquettes P with their boundary edges E(P) and vertices V(P)."""

    plaquettes: frozenset[int]
    edges: frozenset[int]
    vertices: frozenset[int]

    def __len__(self) -> int:
        return len(self.plaquettes)

    def __contains__(self, plaquette: object) -> bool:
        return plaquette in self.plaquettes

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.plaquettes))

    @property
    def pair_count(self) -> int:
        return len(self.plaquettes)

    @property
    def oriented_count(self) -> int:
        return 2 * len(self.plaquettes)

    def union(self, other: "PlaquetteSet") -> "PlaquetteSet":
        return PlaquetteSet(
            plaquettes=self.plaquettes | other.plaquettes,
            edges=self.edges | other.edges,
            vertices=self.vertices | other.vertices,
        )


def plaquette_set(lat: Lattice, plaquettes: Iterable[int]) -> PlaquetteSet:
    ids = np.fromiter((int(p) for p in plaquettes), dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= lat.n_plaquettes):
        raise ValidationError("plaquette id out of range")
    return PlaquetteSet(
        plaquettes=frozenset(ids.tolist()),
        edges=frozenset(np.unique(lat.plaquette_edges[ids]).tolist()),
        vertices=frozenset(np.unique(lat.plaquette_vertices[ids]).tolist()),
    )


def minimal_vortex(lat: Lattice, edge: int) -> PlaquetteSet:
    plaquettes = lat.incident_plaquettes(edge)
    if plaquettes.size != 2 * (lat.d - 1):
        raise ValidationError(
            f"edge {edge} lies on the lattice boundary ({plaquettes.size} of {2 * (lat.d - 1)} plaquettes)"
        )
    return plaquette_set(lat, plaquettes)


def is_interior_edge(lat: Lattice, edge: int) -> bool:
    return lat.incident_plaquettes(edge).size == 2 * (lat.d - 1)


@dataclass(frozen=True, slots=True)
class Loop:
    edges: tuple[OrientedEdge, ...]
    vertices: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.edges)

    @property
    def edge_ids(self) -> frozenset[int]:
        return frozenset(edge for edge, _ in self.edges)

    @classmethod
    def from_edges(cls, lat: Lattice, edges: Sequence[OrientedEdge]) -> "Loop":
        if not edges:
            raise ValidationError("a loop needs at least one edge")
        normalized = tuple((int(e), 1 if s > 0 else -1) for e, s in edges)
        vertices: list[int] = []
        for index, edge in enumerate(normalized):
            tail, head = lat.oriented_endpoints(edge)
            following = normalized[(index + 1) % len(normalized)]
            if following[0] == edge[0] and following[1] == -edge[1]:
                raise ValidationError(f"path backtracks along edge {edge[0]}")
            next_tail, _ = lat.oriented_endpoints(following)
            if head != next_tail:
                if index == len(normalized) - 1:
                    raise ValidationError("path is not closed")
                raise ValidationError(f"path breaks between edge {index} and edge {index + 1}")
            vertices.append(tail)
        if len(set(vertices)) != len(vertices):
            raise ValidationError("loop revisits a vertex")
        return cls(edges=normalized, vertices=tuple(vertices))

    def rotated(self, shift: int) -> "Loop":
        shift %= len(self.edges)
        return Loop(edges=self.edges[shift:] + self.edges[:shift], vertices=self.vertices[shift:] + self.vertices[:shift])


def rectangular_loop(
    lat: Lattice,
    corner: Sequence[int] | int,
    axes: tuple[int, int],
    extent: tuple[int, int],
) -> Loop:
    i, j = axes
    a, b = extent
    if i == j or not (0 <= i < lat.d and 0 <= j < lat.d):
        raise ValidationError(f"axes {axes} must be two distinct lattice axes")
    if a < 1 or b < 1:
        raise ValidationError(f"rectangle extent {extent} must be positive")
    origin = lat.coords[corner] if isinstance(corner, (int, np.integer)) else np.asarray(corner, dtype=np.int64)
    unit_i = np.eye(lat.d, dtype=np.int64)[i]
    unit_j = np.eye(lat.d, dtype=np.int64)[j]
    far = origin + a * unit_i + b * unit_j
    if np.any(origin < 0) or np.any(far > np.asarray(lat.dims)):
        raise ValidationError(f"rectangle {extent} at {tuple(origin)} leaves the lattice")

    edges: list[OrientedEdge] = []
    edges += [(lat.edge_at(origin + s * unit_i, i), 1) for s in range(a)]
    edges += [(lat.edge_at(origin + a * unit_i + t * unit_j, j), 1) for t in range(b)]
    edges += [(lat.edge_at(origin + (a - 1 - s) * unit_i + b * unit_j, i), -1) for s in range(a)]
    edges += [(lat.edge_at(origin + (b - 1 - t) * unit_j, j), -1) for t in range(b)]
    return Loop.from_edges(lat, edges)


@dataclass(frozen=True, slots=True)
class Surface:
    coefficients: dict[int, int]

    def __post_init__(self) -> None:
        if any(value not in (-1, 0, 1) for value in self.coefficients.values()):
            raise ValueError("surface coefficients must lie in {-1, 0, 1}")


def loop_chain(lat: Lattice, loop: Loop) -> np.ndarray:
    chain = np.zeros(lat.n_edges, dtype=np.int64)
    for edge, sign in loop.edges:
        chain[edge] += sign
    return chain


def surface_boundary(lat: Lattice, surface: Surface) -> np.ndarray:
    chain = np.zeros(lat.n_edges, dtype=np.int64)
    for plaquette, coefficient in surface.coefficients.items():
        np.add.at(chain, lat.plaquette_edges[plaquette], coefficient * lat.plaquette_signs[plaquette])
    return chain


def spanning_surface(lat: Lattice, loop: Loop) -> Surface:
    points = lat.coords[list(loop.vertices)]
    varying = np.nonzero(points.max(axis=0) != points.min(axis=0))[0]
    if varying.size != 2:
        raise ValidationError("only planar rectangular loops have a built-in spanning surface")
    i, j = (int(axis) for axis in varying)
    lo = points.min(axis=0)
    a = int(points[:, i].max() - lo[i])
    b = int(points[:, j].max() - lo[j])
    if loop.length != 2 * (a + b):
        raise ValidationError("loop is planar but not a rectangle")

    unit_i = np.eye(lat.d, dtype=np.int64)[i]
    unit_j = np.eye(lat.d, dtype=np.int64)[j]
    filling = [lat.plaquette_at(lo + s * unit_i + t * unit_j, (i, j)) for s in range(a) for t in range(b)]
    candidate = Surface({plaquette: 1 for plaquette in filling})
    boundary = surface_boundary(lat, candidate)
    target = loop_chain(lat, loop)
    if np.array_equal(boundary, target):
        return candidate
    if np.array_equal(boundary, -target):
        return Surface({plaquette: -1 for plaquette in filling})
    raise ValidationError("loop is planar but not a rectangle")


@dataclass(frozen=True, slots=True)
class SpanningTree:
    edges: frozenset[int]
    base: int

    def __contains__(self, edge: object) -> bool:
        return edge in self.edges


def constrained_spanning_tree(
    lat: Lattice,
    regions: Sequence[Iterable[int]] = (),
    avoid: Iterable[int] = (),
    base: int = 0,
) -> SpanningTree:
    """Spanning tree whose restriction to every region spans that region.

    Regions are disjoint vertex sets; vertices outside all regions are
    unconstrained. Avoided edges never enter the tree.
    """
    region_of = np.full(lat.n_vertices, -1, dtype=np.int64)
    members: list[np.ndarray] = []
    for index, region in enumerate(regions):
        vertices = np.unique(np.fromiter((int(v) for v in region), dtype=np.int64))
        if vertices.size and np.any(region_of[vertices] >= 0):
            raise ValidationError(f"region {index} overlaps an earlier region")
        region_of[vertices] = index
        members.append(vertices)
    avoided = np.zeros(lat.n_edges, dtype=bool)
    avoided[np.fromiter((int(e) for e in avoid), dtype=np.int64)] = True

    forest = UnionFind(lat.n_vertices)
    chosen: list[int] = []
    tail_region = region_of[lat.edge_tail]
    internal = (tail_region >= 0) & (tail_region == region_of[lat.edge_head]) & ~avoided
    for edge in np.nonzero(internal)[0]:
        if forest.union(int(lat.edge_tail[edge]), int(lat.edge_head[edge])):
            chosen.append(int(edge))
    for index, vertices in enumerate(members):
        if vertices.size and len({forest.find_parent(int(v)) for v in vertices}) != 1:
            raise ValidationError(f"region {index} is not connected without the avoided edges")

    for edge in np.nonzero(~internal & ~avoided)[0]:
        if forest.union(int(lat.edge_tail[edge]), int(lat.edge_head[edge])):
            chosen.append(int(edge))
    if forest.num_components != 1:
        raise ValidationError("avoided edges disconnect the lattice")
    return SpanningTree(edges=frozenset(chosen), base=base)


def is_spanning_tree(lat: Lattice, edges: Iterable[int]) -> bool:
    forest = UnionFind(lat.n_vertices)
    count = 0
    for edge in edges:
        count += 1
        if not forest.union(int(lat.edge_tail[edge]), int(lat.edge_head[edge])):
            return False
    return count == lat.n_vertices - 1 and forest.num_components == 1


def gauge_transform(lat: Lattice, group: "FiniteGroup", sigma: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Return the field with entries eta_x sigma_e eta_y^{-1} for e = (x, y)."""
    left = group.table[eta[..., lat.edge_tail], sigma]
    return group.table[left, group.inverse[eta[..., lat.edge_head]]]


def gauge_fix(
    lat: Lattice,
    group: "FiniteGroup",
    sigma: np.ndarray,
    tree: SpanningTree,
    base: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gauge ``sigma`` to the identity on every tree edge with ``eta_base = 1``."""
    root = tree.base if base is None else base
    adjacency: dict[int, list[int]] = {}
    for edge in tree.edges:
        adjacency.setdefault(int(lat.edge_tail[edge]), []).append(edge)
        adjacency.setdefault(int(lat.edge_head[edge]), []).append(edge)

    eta = np.full(lat.n_vertices, group.identity, dtype=np.int64)
    visited = np.zeros(lat.n_vertices, dtype=bool)
    visited[root] = True
    queue = deque([root])
    while queue:
        vertex = queue.popleft()
        for edge in adjacency.get(vertex, ()):
            tail, head = int(lat.edge_tail[edge]), int(lat.edge_head[edge])
            other = head if tail == vertex else tail
            if visited[other]:
                continue
            if tail == vertex:
                eta[other] = group.table[eta[vertex], sigma[edge]]
            else:
                eta[other] = group.table[eta[vertex], group.inverse[sigma[edge]]]
            visited[other] = True
            queue.append(other)
    if not visited.all():
        raise ValidationError("tree does not span the lattice")
    return gauge_transform(lat, group, sigma, eta), eta


def gauge_unfix(lat: Lattice, group: "FiniteGroup", sigma_tilde: np.ndarray, eta: np.ndarray) -> np.ndarray:
    return gauge_transform(lat, group, sigma_tilde, group.inverse[eta])
