from __future__ import annotations

import numpy as np
import pytest

from vortexlab.application.use_cases import compatible_minimal_pair
from vortexlab.domain.analysis import excited_plaquette_mask
from vortexlab.domain.groups import HiggsGroup, make_group
from vortexlab.domain.hamiltonians import make_model, wilson_loop_value
from vortexlab.domain.lattice import build_lattice, minimal_vortex, plaquette_set, rectangular_loop
from vortexlab.domain.value_objects import Configuration, PhiVariant
from vortexlab.exceptions import BudgetExceededError, ValidationError
from vortexlab.infrastructure.executor import ThreadPoolTaskExecutor
from vortexlab.services.oracle import (
    EnumerationBudget,
    ExactOracle,
    conditional_vortex_probability,
    contains_nontrivial_vortex,
    contains_vortex,
    exact_current_marginal,
    exact_event_probability,
    exact_expectation,
    exact_kn_edge_law,
    exact_partition,
    exact_phi,
    gibbs_state_law,
    per_configuration,
    phi_upper_bound,
    reference_expectation,
    state_count,
    wilson_observable,
)
from vortexlab.services.predictor import phi_minimal


def _toy(beta: float, kappa: float, energies=(1.0, 0.2, 0.1, 0.0)):
    group, rep = make_group("cyclic", order=2)
    return make_model("toy", group, rep, HiggsGroup(2), beta, kappa, energies=energies)


def test_free_toy_partition_counts_states() -> None:
    lat = build_lattice((1, 1))
    params = _toy(0.0, 0.0, energies=(1.0, 0.0, 0.0, 0.0))
    loop = rectangular_loop(lat, (0, 0), (0, 1), (1, 1))

    assert state_count(lat, params) == 256
    assert exact_partition(params, lat) == pytest.approx(256.0)
    assert abs(exact_expectation(params, lat, wilson_observable(params, loop))) < 1e-12


def test_chunked_sum_matches_reference_order() -> None:
    lat = build_lattice((1, 1))
    params = _toy(0.4, 0.3)
    loop = rectangular_loop(lat, (0, 0), (0, 1), (1, 1))
    observable = wilson_observable(params, loop)

    forward = ExactOracle(lat, params, chunk_size=5).expectation(observable)
    backward = ExactOracle(lat, params, chunk_size=64).expectation(observable, reverse=True)
    reference = reference_expectation(params, lat, lambda cfg: wilson_loop_value(cfg.sigma, loop, params.rep))

    assert forward == pytest.approx(backward, abs=1e-12)
    assert forward == pytest.approx(reference, abs=1e-12)


def test_threaded_map_gives_same_partition() -> None:
    lat = build_lattice((1, 1))
    params = _toy(0.4, 0.3)
    pool = ThreadPoolTaskExecutor(threads=3)

    threaded = ExactOracle(lat, params, chunk_size=16, map_fn=pool.map).log_partition()

    assert threaded == pytest.approx(ExactOracle(lat, params).log_partition(), abs=1e-12)


def test_gauged_out_model_skips_higgs_digits() -> None:
    lat = build_lattice((1, 1))
    group, rep = make_group("cyclic", order=3)
    params = make_model("gauged-out", group, rep, HiggsGroup(3), 0.5, 0.5)

    assert state_count(lat, params) == 3**lat.n_edges


def test_budget_is_checked_before_enumerating() -> None:
    lat = build_lattice((2, 2))
    params = _toy(0.4, 0.3)
    budget = EnumerationBudget(max_states=1000)

    with pytest.raises(BudgetExceededError):
        ExactOracle(lat, params, budget=budget).partition()
    assert budget.visited == 0


def test_budget_records_visited_states() -> None:
    lat = build_lattice((1, 1))
    params = _toy(0.4, 0.3)
    budget = EnumerationBudget()

    ExactOracle(lat, params, budget=budget).partition()

    assert budget.visited == 256


def test_phi_of_deep_minimal_vortex_matches_closed_form() -> None:
    lat = build_lattice((4, 4))
    params = _toy(0.3, 0.2)
    vortex = minimal_vortex(lat, lat.edge_at((2, 2), 0))

    phi = exact_phi(params, lat, vortex)

    assert phi == pytest.approx(phi_minimal(params, d=2), rel=1e-10)
    assert phi == pytest.approx(np.exp(-8 * 0.3) * np.exp(0.2 * (0.2 - 2.0)), rel=1e-10)
    assert phi <= phi_upper_bound(params, lat, vortex)


def test_phi_variants_need_a_loop() -> None:
    lat = build_lattice((4, 4))
    params = _toy(0.3, 0.2)
    vortex = minimal_vortex(lat, lat.edge_at((2, 2), 0))

    with pytest.raises(ValidationError):
        exact_phi(params, lat, vortex, PhiVariant.WILSON)
    assert exact_phi(params, lat, vortex, "phi-ub") == phi_upper_bound(params, lat, vortex)


def test_wilson_phi_of_minimal_vortex_on_loop() -> None:
    lat = build_lattice((4, 4))
    params = _toy(0.3, 0.2)
    edge = lat.edge_at((2, 2), 0)
    vortex = minimal_vortex(lat, edge)
    loop = rectangular_loop(lat, (1, 2), (0, 1), (2, 1))

    plain = exact_phi(params, lat, vortex)
    weighted = exact_phi(params, lat, vortex, PhiVariant.WILSON, loop)
    nontrivial = exact_phi(params, lat, vortex, PhiVariant.NONTRIVIAL, loop)

    assert edge in loop.edge_ids
    assert weighted == pytest.approx(-plain, rel=1e-10)
    assert nontrivial == pytest.approx(plain, rel=1e-10)


def test_empty_upper_bound_is_one() -> None:
    lat = build_lattice((2, 2))

    assert phi_upper_bound(_toy(0.3, 0.2), lat, plaquette_set(lat, [])) == 1.0


def test_minimal_vortex_is_never_one_component_in_the_plane() -> None:
    lat = build_lattice((2, 1))
    params = _toy(0.3, 0.2)
    vortex = minimal_vortex(lat, lat.edge_at((1, 0), 1))
    oracle = ExactOracle(lat, params)

    probability = oracle.event_probability(per_configuration(contains_vortex(params, lat, vortex), dtype=bool))

    # no 3-cells, so the two plaquettes of P(e) never join in G2
    assert probability == 0.0
    assert exact_phi(params, lat, vortex) > 0.0


def test_conditioning_on_an_impossible_pattern() -> None:
    lat = build_lattice((2, 1))
    params = _toy(0.3, 0.2)
    edge = lat.edge_at((1, 0), 1)

    with pytest.raises(ValidationError, match="probability zero"):
        conditional_vortex_probability(params, lat, minimal_vortex(lat, edge), present=[edge])


def test_conditioning_rejects_boundary_edges() -> None:
    lat = build_lattice((2, 1))
    params = _toy(0.3, 0.2)
    edge = lat.edge_at((1, 0), 1)

    with pytest.raises(ValidationError):
        conditional_vortex_probability(params, lat, minimal_vortex(lat, edge), absent=[lat.edge_at((0, 0), 0)])


def test_kn_edge_law_is_a_symmetric_probability_table() -> None:
    lat = build_lattice((1, 1))
    group, rep = make_group("cyclic", order=2)
    params = make_model("K_N", group, rep, HiggsGroup(2), 0.0, 0.5)

    law = exact_kn_edge_law(params, lat, 0)

    assert law.shape == (2, 2, 2, 2)
    assert law.sum() == pytest.approx(1.0)
    assert np.allclose(law, np.roll(law, 1, axis=(0, 1)))
    assert np.allclose(law, np.roll(law, 1, axis=(2, 3)))


def test_kn_edge_law_needs_kn_model() -> None:
    lat = build_lattice((1, 1))

    with pytest.raises(ValidationError):
        exact_kn_edge_law(_toy(0.3, 0.2), lat, 0)


def test_current_marginal_matches_gibbs_law() -> None:
    lat = build_lattice((1, 1))
    group, rep = make_group("cyclic", order=2)
    params = make_model(
        "random-current", group, rep, HiggsGroup(2), 0.3, 0.3, f_table=np.array([[1.0, 0.0], [0.0, 0.0]])
    )

    states, marginal = exact_current_marginal(params, lat)
    gibbs_states, gibbs = gibbs_state_law(params, lat)

    assert np.array_equal(states, gibbs_states)
    assert marginal == pytest.approx(gibbs, abs=1e-10)


def test_current_marginal_respects_budget() -> None:
    lat = build_lattice((1, 1))
    group, rep = make_group("cyclic", order=2)
    params = make_model(
        "random-current", group, rep, HiggsGroup(2), 0.3, 0.3, f_table=np.array([[1.0, 0.0], [0.0, 0.0]])
    )

    with pytest.raises(BudgetExceededError):
        exact_current_marginal(params, lat, budget=EnumerationBudget(max_states=256))


def test_certain_event_has_probability_one() -> None:
    lat = build_lattice((1, 1))
    params = _toy(0.4, 0.3)

    assert exact_event_probability(params, lat, lambda batch: np.ones(len(batch), dtype=bool)) == pytest.approx(1.0)


def test_ground_edge_probability_matches_oracle() -> None:
    lat = build_lattice((1, 1))
    params = _toy(0.4, 0.3)

    def unflipped(batch):
        return batch.sigma[:, 0] == 0

    assert exact_event_probability(params, lat, unflipped) == pytest.approx(
        ExactOracle(lat, params, chunk_size=7).event_probability(unflipped), abs=1e-12
    )
    assert 0.0 < exact_event_probability(params, lat, unflipped) < 1.0


def test_phi_is_multiplicative_over_compatible_supports() -> None:
    lat = build_lattice((8, 4))
    params = _toy(0.3, 0.2)
    left = minimal_vortex(lat, lat.edge_at((2, 2), 0))
    right = minimal_vortex(lat, lat.edge_at((6, 2), 0))

    joint = exact_phi(params, lat, left.union(right))

    assert left.vertices.isdisjoint(right.vertices)
    assert joint == pytest.approx(exact_phi(params, lat, left) * exact_phi(params, lat, right), rel=1e-10)


def test_compatible_pair_needs_room_for_two_vortices() -> None:
    wide = build_lattice((8, 4))

    pair = compatible_minimal_pair(wide)

    assert pair is not None
    left, right = (minimal_vortex(wide, edge) for edge in pair)
    assert left.vertices.isdisjoint(right.vertices)
    assert compatible_minimal_pair(build_lattice((4, 4))) is None


def test_nontrivial_vortex_probability_is_below_phi_nontrivial() -> None:
    lat = build_lattice((1, 1))
    params = _toy(0.4, 0.3)
    square = plaquette_set(lat, [0])
    loop = rectangular_loop(lat, (0, 0), (0, 1), (1, 1))

    probability = exact_event_probability(
        params, lat, per_configuration(contains_nontrivial_vortex(params, lat, square, loop), dtype=bool)
    )
    flux = exact_event_probability(
        params, lat, lambda batch: excited_plaquette_mask(lat, params, batch.sigma)[:, 0]
    )

    # the only plaquette is in the support whenever its flux is nontrivial
    assert probability == pytest.approx(flux, abs=1e-12)
    assert 0.0 < probability <= exact_phi(params, lat, square, PhiVariant.NONTRIVIAL, loop)


def test_nontrivial_vortex_needs_the_loop() -> None:
    lat = build_lattice((3, 1))
    params = _toy(0.4, 0.3)
    far = plaquette_set(lat, [lat.plaquette_at((2, 0), (0, 1))])
    loop = rectangular_loop(lat, (0, 0), (0, 1), (1, 1))
    sigma = np.zeros(lat.n_edges, dtype=np.int64)
    sigma[lat.edge_at((2, 0), 0)] = 1
    cfg = Configuration(sigma=sigma, phi=np.zeros(lat.n_vertices, dtype=np.int64))

    assert contains_vortex(params, lat, far)(cfg)
    assert not contains_nontrivial_vortex(params, lat, far, loop)(cfg)
