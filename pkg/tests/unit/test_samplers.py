from __future__ import annotations

import numpy as np
import pytest

from vortexlab.domain.groups import HiggsGroup, make_group
from vortexlab.domain.hamiltonians import make_model
from vortexlab.domain.lattice import build_lattice, rectangular_loop
from vortexlab.domain.value_objects import ModelKind, UpdateRule
from vortexlab.exceptions import MissingSeedError, ValidationError
from vortexlab.infrastructure.executor import ThreadPoolTaskExecutor
from vortexlab.services.oracle import ExactOracle, wilson_observable
from vortexlab.services.samplers import (
    ChainState,
    ObservableSeries,
    Schedule,
    as_random_current,
    bond_probability,
    chain_seeds,
    connectivity_decay_profile,
    current_cluster_stats,
    edge_classes,
    fit_decay_rate,
    magnetization_estimate,
    make_rng,
    measure,
    metropolis_sweep,
    run_chains,
    sample_currents,
    symmetrize_edge_law,
    vertex_classes,
)


def _toy(beta: float = 0.4, kappa: float = 0.3):
    group, rep = make_group("cyclic", order=2)
    return make_model("toy", group, rep, HiggsGroup(2), beta, kappa, energies=(1.0, 0.2, 0.1, 0.0))


def _z2_f_table() -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, 0.0]])


def test_seed_is_mandatory() -> None:
    with pytest.raises(MissingSeedError):
        make_rng(None)
    with pytest.raises(MissingSeedError):
        chain_seeds(None, 2)


def test_same_seed_same_stream() -> None:
    first = make_rng(42).random(5)
    second = make_rng(42).random(5)

    assert np.array_equal(first, second)
    assert not np.array_equal(first, make_rng(43).random(5))


def test_edge_classes_partition_without_shared_plaquettes() -> None:
    lat = build_lattice((3, 2, 2))

    classes = edge_classes(lat)

    assert sorted(np.concatenate(classes).tolist()) == list(range(lat.n_edges))
    for members in classes:
        plaquettes = lat.edge_plaquettes[members]
        used = plaquettes[plaquettes >= 0]
        assert used.size == np.unique(used).size


def test_vertex_classes_hold_no_neighbours() -> None:
    lat = build_lattice((3, 3))

    for members in vertex_classes(lat):
        inside = np.zeros(lat.n_vertices, dtype=bool)
        inside[members] = True
        assert not np.any(inside[lat.edge_tail] & inside[lat.edge_head])


def test_chains_are_reproducible_and_thread_independent() -> None:
    lat = build_lattice((2, 2))
    params = _toy()
    loop = rectangular_loop(lat, (0, 0), (0, 1), (1, 1))
    schedule = Schedule(measurements=20, burn_in=5, thinning=2, chains=3)

    sequential = run_chains(lat, params, loop, schedule, seed=7)
    again = run_chains(lat, params, loop, schedule, seed=7)
    threaded = run_chains(lat, params, loop, schedule, seed=7, map_fn=ThreadPoolTaskExecutor(threads=3).map)

    for left, middle, right in zip(sequential, again, threaded):
        assert np.array_equal(left.wilson, middle.wilson)
        assert np.array_equal(left.wilson, right.wilson)
        assert np.array_equal(left.minimal_counts, right.minimal_counts)
    assert not np.array_equal(sequential[0].wilson, sequential[1].wilson) or not np.array_equal(
        sequential[0].energy, sequential[1].energy
    )


@pytest.mark.parametrize("rule", [UpdateRule.METROPOLIS, UpdateRule.HEAT_BATH])
def test_sampled_wilson_loop_matches_exact_value(rule) -> None:
    lat = build_lattice((1, 1))
    params = _toy()
    loop = rectangular_loop(lat, (0, 0), (0, 1), (1, 1))
    schedule = Schedule(measurements=3200, burn_in=200, thinning=1, chains=2, rule=rule)

    series = ObservableSeries.merge(run_chains(lat, params, loop, schedule, seed=2026))
    estimate = series.estimates(batches=16)["wilson"]
    exact = ExactOracle(lat, params).expectation(wilson_observable(params, loop))

    assert abs(estimate.mean - exact) <= 5 * estimate.stderr + 0.02


def test_energy_series_stays_non_positive() -> None:
    lat = build_lattice((2, 2))
    params = _toy()
    loop = rectangular_loop(lat, (0, 0), (0, 1), (2, 2))

    series = run_chains(lat, params, loop, Schedule(measurements=32, burn_in=4, thinning=1), seed=1)[0]

    assert np.all(series.energy <= 1e-12)
    assert 0.0 < series.acceptance_rate <= 1.0


def test_validators_stay_quiet_on_low_disorder_samples() -> None:
    lat = build_lattice((2, 2, 2))
    params = _toy(beta=0.3, kappa=0.2)
    loop = rectangular_loop(lat, (0, 1, 1), (0, 1), (1, 1))
    schedule = Schedule(measurements=16, burn_in=4, thinning=1)

    series = run_chains(lat, params, loop, schedule, seed=9, validate=True)[0]

    assert series.checks is not None
    assert series.checks.samples == 16
    assert series.checks.violations == 0
    assert series.checks.small_vortices == 0


def test_random_current_chain_draws_currents() -> None:
    lat = build_lattice((3, 3))
    group, rep = make_group("cyclic", order=2)
    params = make_model("random-current", group, rep, HiggsGroup(2), 0.5, 0.8, f_table=_z2_f_table())

    state = ChainState.start(lat, params, 5)
    metropolis_sweep(state)

    assert state.cfg.currents is not None
    assert state.cfg.currents.shape == (lat.n_edges,)
    assert np.all(state.cfg.currents >= 0)
    assert state.sweeps == 1


def test_no_currents_without_coupling() -> None:
    lat = build_lattice((2, 2))
    group, rep = make_group("cyclic", order=2)
    params = make_model("random-current", group, rep, HiggsGroup(2), 0.5, 0.0, f_table=_z2_f_table())
    state = ChainState.start(lat, params, 5)

    assert not sample_currents(state.cfg, params, lat, state.rng).any()


def test_as_random_current_keeps_couplings() -> None:
    params = _toy()

    converted = as_random_current(params)

    assert converted.kind is ModelKind.RANDOM_CURRENT
    assert (converted.beta, converted.kappa) == (params.beta, params.kappa)
    assert converted.offset_c == pytest.approx(max(0.0, 1.0 - params.edge_table.min()))


def test_cluster_stats_along_a_line() -> None:
    lat = build_lattice((4, 4))
    currents = np.zeros(lat.n_edges, dtype=np.int64)
    for x in range(3):
        currents[lat.edge_at((x, 2), 0)] = 1

    stats = current_cluster_stats(currents, lat, distance=2)
    start = lat.vertex_at((0, 2))
    center = lat.vertex_at((2, 2))

    assert stats.count == lat.n_vertices - 3
    assert stats.sizes.max() == 4
    assert stats.reaches_shell[start]
    assert stats.reaches_shell[center]
    assert not stats.reaches_shell[lat.vertex_at((2, 1))]
    assert stats.eligible[center]
    assert not stats.eligible[start]


def test_bond_probability_formula() -> None:
    group, rep = make_group("cyclic", order=2)
    params = make_model("random-current", group, rep, HiggsGroup(2), 0.5, 0.1, f_table=_z2_f_table())

    expected = 1.0 - np.exp(-0.1 * (params.edge_table.max() + params.offset_c))

    assert bond_probability(params) == pytest.approx(expected)
    assert bond_probability(params) <= 1.0 - np.exp(-0.1 * (2 * params.f_table.max() + params.offset_c))


def test_fit_decay_rate() -> None:
    distances = [2, 4, 6]

    assert fit_decay_rate(distances, [np.exp(-0.5 * k) for k in distances]) == pytest.approx(0.5)
    assert fit_decay_rate(distances, [0.3, 0.0, 0.0]) is None


def test_symmetrized_edge_law_is_invariant() -> None:
    group, rep = make_group("cyclic", order=2)
    params = make_model("K_N", group, rep, HiggsGroup(2), 0.0, 0.5)
    table = np.zeros((2, 2, 2, 2))
    table[0, 0, 0, 1] = 1.0

    law = symmetrize_edge_law(table, params)

    assert law.sum() == pytest.approx(1.0)
    assert law[0, 0, 0, 1] == pytest.approx(law[1, 1, 1, 0])


def test_magnetization_estimate_needs_kn() -> None:
    lat = build_lattice((2, 2))

    with pytest.raises(ValidationError):
        magnetization_estimate(lat, _toy(), 0, 10, Schedule(measurements=10, burn_in=1), seed=1)


def test_magnetization_estimate_is_a_law() -> None:
    lat = build_lattice((2, 2))
    group, rep = make_group("cyclic", order=2)
    params = make_model("K_N", group, rep, HiggsGroup(2), 0.0, 0.5)

    law = magnetization_estimate(lat, params, 0, 50, Schedule(measurements=50, burn_in=5, thinning=1), seed=3)

    assert law.shape == (2, 2, 2, 2)
    assert law.sum() == pytest.approx(1.0)
    assert np.all(law >= 0)


def test_schedule_rejects_empty_runs() -> None:
    with pytest.raises(ValueError):
        Schedule(measurements=0)


def test_measure_counts_stay_within_the_loop() -> None:
    lat = build_lattice((3, 3, 3))
    params = _toy(beta=0.6, kappa=0.4)
    loop = rectangular_loop(lat, (0, 0, 1), (0, 1), (2, 1))
    state = ChainState.start(lat, params, 12)

    series = measure(state, loop, Schedule(measurements=10, burn_in=2, thinning=1))

    assert len(series) == 10
    assert np.all(series.minimal_counts >= 0)
    assert np.all(series.minimal_counts <= loop.length)
    assert np.allclose(np.abs(series.wilson), 1.0)
    assert state.sweeps == 12


def test_measure_needs_a_gauge_field() -> None:
    lat = build_lattice((2, 2))
    group, rep = make_group("cyclic", order=2)
    params = make_model("K_N", group, rep, HiggsGroup(2), 0.0, 0.5)
    loop = rectangular_loop(lat, (0, 0), (0, 1), (1, 1))

    with pytest.raises(ValidationError):
        measure(ChainState.start(lat, params, 1), loop, Schedule(measurements=2, burn_in=0))


def test_no_connectivity_without_coupling() -> None:
    lat = build_lattice((6, 6))
    group, rep = make_group("cyclic", order=2)
    params = make_model("random-current", group, rep, HiggsGroup(2), 0.5, 0.0, f_table=_z2_f_table())

    profile = connectivity_decay_profile(lat, params, [0.0], [1, 2], 4, Schedule(measurements=1, burn_in=2), seed=8)

    assert [(row.distance, row.probability, row.bond_probability) for row in profile.rows] == [(1, 0.0, 0.0), (2, 0.0, 0.0)]
    assert profile.decay_rates[0.0] is None
    assert profile.bond_p[0.0] == 0.0


def test_connectivity_profile_is_thread_independent() -> None:
    lat = build_lattice((6, 6))
    group, rep = make_group("cyclic", order=2)
    params = make_model("random-current", group, rep, HiggsGroup(2), 0.5, 0.3, f_table=_z2_f_table())
    schedule = Schedule(measurements=1, burn_in=3, thinning=1)

    sequential = connectivity_decay_profile(lat, params, [0.1, 0.3], [1, 2], 5, schedule, seed=4)
    threaded = connectivity_decay_profile(
        lat, params, [0.1, 0.3], [1, 2], 5, schedule, seed=4, map_fn=ThreadPoolTaskExecutor(threads=2).map
    )

    assert sequential.rows == threaded.rows
    assert len(sequential.rows) == 4
    assert all(0.0 <= row.probability <= 1.0 for row in sequential.rows)
