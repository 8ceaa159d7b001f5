from __future__ import annotations

import numpy as np
import pytest

from vortexlab.domain.groups import make_group, plaquette_products
from vortexlab.domain.lattice import (
    Loop,
    build_lattice,
    constrained_spanning_tree,
    g2_adjacency,
    gauge_fix,
    gauge_unfix,
    is_interior_edge,
    is_spanning_tree,
    loop_chain,
    minimal_vortex,
    plaquette_set,
    rectangular_loop,
    spanning_surface,
    surface_boundary,
)
from vortexlab.domain.union_find import UnionFind
from vortexlab.exceptions import ConfigurationError, ValidationError


def _plaquette_loop(lat, plaquette: int) -> Loop:
    edges = [(int(e), int(s)) for e, s in zip(lat.plaquette_edges[plaquette], lat.plaquette_signs[plaquette])]
    return Loop.from_edges(lat, edges)


@pytest.mark.parametrize(
    ("dims", "vertices", "edges", "plaquettes", "cubes"),
    [
        ((2, 2), 9, 12, 4, 0),
        ((1, 1, 1), 8, 12, 6, 1),
        ((2, 2, 2, 2), 81, 216, 216, 96),
    ],
)
def test_cell_counts(dims, vertices, edges, plaquettes, cubes) -> None:
    lat = build_lattice(dims)

    assert lat.n_vertices == vertices
    assert lat.n_edges == edges
    assert lat.n_plaquettes == plaquettes
    assert lat.n_cubes == cubes


@pytest.mark.parametrize("dims", [(3,), (2, 2, 2, 2, 2), (0, 2)])
def test_rejects_bad_dimensions(dims) -> None:
    with pytest.raises(ConfigurationError):
        build_lattice(dims)


def test_every_plaquette_boundary_closes() -> None:
    lat = build_lattice((2, 2, 2))

    for plaquette in range(lat.n_plaquettes):
        loop = _plaquette_loop(lat, plaquette)
        assert loop.length == 4
        assert set(loop.vertices) == set(lat.plaquette_vertices[plaquette].tolist())


def test_edge_ids_follow_base_then_axis() -> None:
    lat = build_lattice((2, 3))

    first = lat.edge_at((0, 0), 0)
    second = lat.edge_at((0, 0), 1)

    assert (first, second) == (0, 1)
    assert lat.oriented_endpoints((first, -1)) == (lat.vertex_at((1, 0)), lat.vertex_at((0, 0)))
    with pytest.raises(ValidationError):
        lat.edge_at((2, 0), 0)


def test_minimal_vortex_of_interior_edge() -> None:
    lat = build_lattice((2, 2, 2))
    edge = lat.edge_at((0, 1, 1), 0)

    vortex = minimal_vortex(lat, edge)

    assert is_interior_edge(lat, edge)
    assert vortex.pair_count == 4
    assert vortex.oriented_count == 8
    assert edge in vortex.edges


def test_minimal_vortex_has_six_plaquettes_in_four_dimensions() -> None:
    lat = build_lattice((2, 2, 2, 2))
    edge = lat.edge_at((0, 1, 1, 1), 0)

    assert minimal_vortex(lat, edge).pair_count == 6


def test_minimal_vortex_rejects_boundary_edge() -> None:
    lat = build_lattice((2, 2, 2))

    with pytest.raises(ValidationError):
        minimal_vortex(lat, lat.edge_at((0, 0, 0), 0))


def test_rectangular_loop_is_closed_and_simple() -> None:
    lat = build_lattice((4, 4, 4))

    loop = rectangular_loop(lat, (1, 1, 2), (0, 1), (2, 3))

    assert loop.length == 10
    assert len(set(loop.vertices)) == 10
    assert loop.rotated(3).edge_ids == loop.edge_ids


def test_rectangular_loop_must_fit() -> None:
    lat = build_lattice((2, 2))

    with pytest.raises(ValidationError):
        rectangular_loop(lat, (1, 1), (0, 1), (2, 1))


def test_open_path_is_not_a_loop() -> None:
    lat = build_lattice((2, 2))
    edges = [(lat.edge_at((0, 0), 0), 1), (lat.edge_at((1, 0), 0), 1)]

    with pytest.raises(ValidationError):
        Loop.from_edges(lat, edges)


def test_backtracking_path_is_not_a_loop() -> None:
    lat = build_lattice((2, 2))
    edge = lat.edge_at((0, 0), 0)

    with pytest.raises(ValidationError, match="backtracks"):
        Loop.from_edges(lat, [(edge, 1), (edge, -1)])


def test_spanning_surface_boundary_is_the_loop() -> None:
    lat = build_lattice((3, 3, 2))
    loop = rectangular_loop(lat, (0, 1, 1), (0, 1), (3, 2))

    surface = spanning_surface(lat, loop)

    assert len(surface.coefficients) == 6
    assert np.array_equal(surface_boundary(lat, surface), loop_chain(lat, loop))


def test_g2_links_all_faces_of_a_cube() -> None:
    lat = build_lattice((1, 1, 1))

    graph = g2_adjacency(lat)

    assert graph.shape == (6, 6)
    assert np.all(np.asarray(graph.sum(axis=1)).ravel() == 5)


def test_g2_is_empty_in_two_dimensions() -> None:
    lat = build_lattice((3, 3))

    assert g2_adjacency(lat).nnz == 0


def test_plaquette_set_collects_edges_and_vertices() -> None:
    lat = build_lattice((2, 2))

    both = plaquette_set(lat, [0, 1])

    assert len(both) == 2
    assert len(both.edges) == 7
    assert len(both.vertices) == 6
    with pytest.raises(ValidationError):
        plaquette_set(lat, [lat.n_plaquettes])


def test_constrained_tree_spans_each_region() -> None:
    lat = build_lattice((3, 3))
    region = lat.plaquette_vertices[lat.plaquette_at((1, 1), (0, 1))].tolist()

    tree = constrained_spanning_tree(lat, regions=[region])

    inside = [e for e in tree.edges if lat.edge_tail[e] in region and lat.edge_head[e] in region]
    assert is_spanning_tree(lat, tree.edges)
    assert len(inside) == len(region) - 1


def test_constrained_tree_reports_disconnecting_avoid_set() -> None:
    lat = build_lattice((1, 1))
    corner = lat.vertex_at((0, 0))

    with pytest.raises(ValidationError):
        constrained_spanning_tree(lat, avoid=lat.incident_edges(corner).tolist())


def test_gauge_fix_trivializes_tree_and_keeps_plaquettes() -> None:
    lat = build_lattice((2, 3))
    group, _ = make_group("cyclic", order=3)
    sigma = np.random.default_rng(7).integers(0, 3, size=lat.n_edges)
    tree = constrained_spanning_tree(lat)

    fixed, eta = gauge_fix(lat, group, sigma, tree)

    assert all(fixed[e] == group.identity for e in tree.edges)
    assert eta[tree.base] == group.identity
    assert np.array_equal(plaquette_products(lat, group, fixed), plaquette_products(lat, group, sigma))
    assert np.array_equal(gauge_unfix(lat, group, fixed, eta), sigma)


def test_union_find_components() -> None:
    forest = UnionFind(5)

    assert forest.union(0, 1)
    assert forest.union(3, 4)
    assert not forest.union(1, 0)

    assert forest.connected(0, 1)
    assert not forest.connected(1, 3)
    assert forest.num_components == 3
    assert sorted(sorted(c) for c in forest.retrieve_components()) == [[0, 1], [2], [3, 4]]
