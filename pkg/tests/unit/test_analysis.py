from __future__ import annotations

import numpy as np
import pytest

from vortexlab.domain.analysis import (
    Vortex,
    classify_vortex,
    count_minimal_on_loop,
    enumerate_vortices_containing,
    external_boundary,
    find_separating_box,
    is_well_separated,
    knot_decomposition,
    minimal_center,
    support_low_disorder,
    support_of,
    support_pure_gauge,
    support_random_current,
    touches_boundary,
    validate_monochrome,
    vortex_decomposition,
)
from vortexlab.domain.groups import HiggsGroup, make_group
from vortexlab.domain.hamiltonians import make_model
from vortexlab.domain.lattice import build_lattice, minimal_vortex, plaquette_set, rectangular_loop
from vortexlab.domain.value_objects import Configuration, SupportKind, VortexClass
from vortexlab.exceptions import BudgetExceededError, ValidationError


def _toy():
    group, rep = make_group("cyclic", order=2)
    return make_model("toy", group, rep, HiggsGroup(2), 1.0, 1.0, energies=(1.0, 0.0, 0.0, 0.0))


def _flipped(lat, params, *edges: int) -> Configuration:
    cfg = Configuration.ground(lat, params)
    for edge in edges:
        cfg.sigma[edge] = 1
    return cfg


def test_ground_state_has_empty_support() -> None:
    lat = build_lattice((2, 2, 2))
    params = _toy()

    support = support_of(Configuration.ground(lat, params), params, lat, SupportKind.LOW_DISORDER)

    assert len(support) == 0
    assert vortex_decomposition(support, lat) == []
    assert not touches_boundary(lat, support)


def test_flipped_edge_gives_its_minimal_vortex() -> None:
    lat = build_lattice((2, 2, 2))
    params = _toy()
    edge = lat.edge_at((0, 1, 1), 0)
    cfg = _flipped(lat, params, edge)

    support = support_of(cfg, params, lat, "low-disorder")
    vortices = vortex_decomposition(support, lat)

    assert support == minimal_vortex(lat, edge)
    assert support_low_disorder(cfg, params, lat) == support
    assert support_pure_gauge(cfg.sigma, params, lat) == support
    assert len(vortices) == 1
    assert minimal_center(lat, vortices[0].plaquettes) == edge


def test_higgs_excitation_widens_support() -> None:
    lat = build_lattice((2, 2, 2))
    params = _toy()
    cfg = Configuration.ground(lat, params)
    center = lat.vertex_at((1, 1, 1))
    cfg.phi[center] = 1

    support = support_of(cfg, params, lat, SupportKind.LOW_DISORDER)

    assert len(support_pure_gauge(cfg.sigma, params, lat)) == 0
    assert support.plaquettes == frozenset(
        int(p) for e in lat.incident_edges(center) for p in lat.incident_plaquettes(int(e))
    )


def test_random_current_support_includes_plaquettes_at_active_vertices() -> None:
    lat = build_lattice((2, 2))
    params = _toy()
    sigma = np.zeros(lat.n_edges, dtype=np.int64)
    currents = np.zeros(lat.n_edges, dtype=np.int64)
    currents[lat.edge_at((0, 0), 0)] = 2

    support = support_random_current(sigma, currents, params, lat)

    assert support.plaquettes == {lat.plaquette_at((0, 0), (0, 1)), lat.plaquette_at((1, 0), (0, 1))}


def test_random_current_support_needs_currents() -> None:
    lat = build_lattice((2, 2))
    params = _toy()

    with pytest.raises(ValidationError):
        support_of(Configuration.ground(lat, params), params, lat, SupportKind.RANDOM_CURRENT)


def test_minimal_center_rejects_other_shapes() -> None:
    lat = build_lattice((2, 2, 2))

    assert minimal_center(lat, plaquette_set(lat, [0, 1, 2, 3])) is None
    assert minimal_center(lat, plaquette_set(lat, [0])) is None


def test_separating_box_and_overlap() -> None:
    lat = build_lattice((6, 6, 6))
    near = minimal_vortex(lat, lat.edge_at((1, 3, 3), 0))
    far = minimal_vortex(lat, lat.edge_at((4, 3, 3), 0))

    box = is_well_separated(near, far, lat)

    assert box is not None
    assert box.strictly_contains(lat.coords[sorted(near.vertices)]).all()
    assert not box.closed_contains(lat.coords[sorted(far.vertices)]).any()
    with pytest.raises(ValidationError):
        is_well_separated(near, near, lat)


def test_touching_sets_are_not_separated() -> None:
    lat = build_lattice((6, 6, 6))
    first = minimal_vortex(lat, lat.edge_at((1, 3, 3), 0))
    second = minimal_vortex(lat, lat.edge_at((2, 3, 3), 0))

    assert find_separating_box(lat, first.vertices, second.vertices) is None


def test_knots_of_two_distant_minimal_vortices() -> None:
    lat = build_lattice((6, 6, 6))
    params = _toy()
    cfg = _flipped(lat, params, lat.edge_at((1, 3, 3), 0), lat.edge_at((4, 3, 3), 0))
    loop = rectangular_loop(lat, (0, 3, 3), (0, 1), (2, 1))

    vortices = vortex_decomposition(support_of(cfg, params, lat, "low-disorder"), lat)
    knots = knot_decomposition(vortices, lat, loop)

    assert len(vortices) == 2
    assert len(knots) == 2
    assert all(knot.separating_box is not None for knot in knots)
    assert sorted(knot.pair_count for knot in knots) == [4, 4]
    assert [knot.separated_from_loop for knot in knots].count(True) == 1


def test_classification_against_the_loop() -> None:
    lat = build_lattice((6, 6, 6))
    params = _toy()
    on_loop = lat.edge_at((1, 3, 3), 0)
    elsewhere = lat.edge_at((4, 3, 3), 0)
    cfg = _flipped(lat, params, on_loop, elsewhere)
    loop = rectangular_loop(lat, (0, 3, 3), (0, 1), (2, 1))

    vortices = vortex_decomposition(support_of(cfg, params, lat, "low-disorder"), lat)
    classes = {minimal_center(lat, v.plaquettes): classify_vortex(v, cfg, params, lat, loop) for v in vortices}

    assert classes[on_loop] is VortexClass.MINIMAL_ON_LOOP
    assert classes[elsewhere] is VortexClass.NON_CONTRIBUTING
    assert count_minimal_on_loop(cfg, params, lat, loop) == 1


def test_monochrome_check_accepts_minimal_vortex() -> None:
    lat = build_lattice((2, 2, 2))
    params = _toy()
    edge = lat.edge_at((0, 1, 1), 0)
    cfg = _flipped(lat, params, edge)

    report = validate_monochrome(cfg, params, lat, minimal_vortex(lat, edge))

    assert report.ok
    assert report.component_count == 1


def test_monochrome_check_flags_uncovered_excitation() -> None:
    lat = build_lattice((2, 2, 2))
    params = _toy()
    cfg = _flipped(lat, params, lat.edge_at((0, 1, 1), 0))

    report = validate_monochrome(cfg, params, lat, plaquette_set(lat, []))

    assert not report.ok


def test_external_boundary_of_center_vertex() -> None:
    lat = build_lattice((2, 2, 2))

    boundary = external_boundary([lat.vertex_at((1, 1, 1))], lat)

    assert len(boundary) == 12
    assert len(external_boundary([], lat)) == 0
    with pytest.raises(ValidationError):
        external_boundary([lat.vertex_at((0, 1, 1))], lat)


def test_enumeration_counts_small_vortices() -> None:
    lat = build_lattice((4, 4, 4))
    plaquette = lat.plaquette_at((1, 1, 1), (0, 1))

    assert enumerate_vortices_containing(lat, plaquette, 1) == 1
    assert enumerate_vortices_containing(lat, plaquette, 2) == 10
    with pytest.raises(BudgetExceededError):
        enumerate_vortices_containing(lat, plaquette, 9)
    with pytest.raises(ValidationError):
        enumerate_vortices_containing(lat, plaquette, 0)


def test_interlocked_vortices_share_one_knot() -> None:
    lat = build_lattice((12, 12))
    row = Vortex(plaquette_set(lat, [lat.plaquette_at((x, 3), (0, 1)) for x in range(1, 7)]))
    column = Vortex(plaquette_set(lat, [lat.plaquette_at((3, y), (0, 1)) for y in (1, 2, 4, 5)]))
    far = Vortex(minimal_vortex(lat, lat.edge_at((9, 9), 0)))

    knots = knot_decomposition([row, column, far], lat)

    # each bounding box holds vertices of the other, so no box splits them
    assert find_separating_box(lat, row.plaquettes.vertices, column.plaquettes.vertices) is None
    assert find_separating_box(lat, column.plaquettes.vertices, row.plaquettes.vertices) is None
    assert len(knots) == 2
    assert knots[0].vortices == (far,)
    assert set(knots[1].vortices) == {row, column}
    assert knots[1].pair_count == 10


def test_external_boundary_skips_the_hole_of_an_annulus() -> None:
    lat = build_lattice((6, 6))
    block = [lat.vertex_at((x, y)) for x in range(2, 5) for y in range(2, 5)]
    hole = lat.vertex_at((3, 3))
    ring = [vertex for vertex in block if vertex != hole]
    hole_plaquettes = {lat.plaquette_at((x, y), (0, 1)) for x in (2, 3) for y in (2, 3)}

    boundary = external_boundary(ring, lat)

    assert boundary.plaquettes == external_boundary(block, lat).plaquettes
    assert len(boundary) == 12
    assert boundary.plaquettes.isdisjoint(hole_plaquettes)
