from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy import stats

from vortexlab.domain.analysis import count_minimal_on_loop, enumerate_vortices_containing
from vortexlab.domain.hamiltonians import wilson_loop_value
from vortexlab.domain.lattice import Lattice, build_lattice, g2_adjacency, is_interior_edge, minimal_vortex
from vortexlab.domain.value_objects import ModelKind, ModelParams, PhiVariant
from vortexlab.exceptions import BudgetExceededError, ConfigurationError, MissingSeedError
from vortexlab.services.oracle import (
    EnumerationBudget,
    ExactOracle,
    conditional_vortex_probability,
    contains_nontrivial_vortex,
    contains_vortex,
    exact_current_marginal,
    exact_kn_edge_law,
    exact_phi,
    gibbs_state_law,
    per_configuration,
    reference_expectation,
    state_count,
    wilson_observable,
)
from vortexlab.services.predictor import (
    a_matrix,
    chen_stein,
    d_matrix,
    dimension_constant,
    phi_minimal,
    poisson_moment,
    poisson_moment_series,
    theorem_budgets,
    toy_b_values,
    tv_empirical,
    x_of_g,
)
from vortexlab.services.samplers import (
    ObservableSeries,
    chain_seeds,
    connectivity_decay_profile,
    default_support_kind,
    magnetization_estimate,
    make_rng,
    run_chains,
)
from vortexlab.services.statistics import BatchEstimate, batch_means

from .dtos import ExperimentPlan, MagnetizationSource, Prediction, RunOutput, SampleResult, Table
from .interfaces import ReportWriter, TaskExecutor

logger = logging.getLogger(__name__)

# per-configuration Python passes (decompositions, reference sums) stay below this
PYTHON_STATE_LIMIT = 2**14
PHI_TOLERANCE = 1e-10
MOMENT_TOLERANCE = 1e-12
MOMENT_SERIES_MAX_LAMBDA = 5.0
# side of the box a minimal vortex weight is enumerated on when the run lattice has no deep edge
POLYMER_BOX_SIDE = 4


def _complex(value: complex) -> dict[str, float]:
    value = complex(value)
    return {"re": value.real, "im": value.imag}


def _matrix(value: np.ndarray) -> list[list[dict[str, float]]]:
    return [[_complex(entry) for entry in row] for row in np.atleast_2d(value)]


def _estimate(estimate: BatchEstimate) -> dict[str, Any]:
    mean = complex(estimate.mean)
    return {"mean": _complex(mean), "stderr": estimate.stderr, "batches": estimate.batches}


def _require_seed(plan: ExperimentPlan) -> int:
    if plan.seed is None:
        raise MissingSeedError("no seed in the config and none given on the command line")
    return plan.seed


def _enumeration_options(plan: ExperimentPlan, executor: TaskExecutor) -> dict[str, Any]:
    return {
        "budget": EnumerationBudget(max_states=plan.max_states),
        "chunk_size": plan.chunk_size,
        "map_fn": executor.map,
    }


def _interior_edges(lat: Lattice) -> list[int]:
    """Edges whose endpoints are both off the lattice boundary."""
    boundary = lat.boundary_vertex_mask()
    return np.nonzero(~boundary[lat.edge_tail] & ~boundary[lat.edge_head])[0].tolist()


def _deep_edges(lat: Lattice) -> list[int]:
    """Edges whose whole minimal vortex stays off the lattice boundary."""
    boundary = lat.boundary_vertex_mask()
    return [
        edge
        for edge in _interior_edges(lat)
        if not boundary[lat.plaquette_vertices[lat.incident_plaquettes(edge)]].any()
    ]


def _pick_edge(plan: ExperimentPlan, candidates: list[int]) -> int:
    """First candidate on the loop, else the first candidate."""
    if plan.loop is not None:
        on_loop = [edge for edge, _ in plan.loop.edges if edge in set(candidates)]
        if on_loop:
            return on_loop[0]
    return candidates[0]


def compatible_minimal_pair(lat: Lattice) -> tuple[int, int] | None:
    """Two deep edges whose minimal vortices share no vertex and are not adjacent in G2."""
    deep = _deep_edges(lat)
    adjacency = g2_adjacency(lat)
    for position, first in enumerate(deep):
        left = minimal_vortex(lat, first)
        rows = sorted(left.plaquettes)
        for second in deep[position + 1 :]:
            right = minimal_vortex(lat, second)
            if not left.vertices.isdisjoint(right.vertices):
                continue
            if adjacency[rows][:, sorted(right.plaquettes)].nnz:
                continue
            return first, second
    return None


def _reference_edge(plan: ExperimentPlan) -> int:
    """Edge used for single-edge laws: an interior edge, preferring the loop, else a loop edge, else edge 0."""
    interior = _interior_edges(plan.lattice)
    if interior:
        return _pick_edge(plan, interior)
    if plan.loop is not None:
        return plan.loop.edges[0][0]
    return 0


def _kn_model(params: ModelParams) -> ModelParams:
    if params.kind is ModelKind.K_N:
        return params
    return ModelParams(
        kind=ModelKind.K_N,
        group=params.group,
        rep=params.rep,
        higgs=params.higgs,
        beta=params.beta,
        kappa=params.kappa,
        f_table=params.f_table,
        higgs_values=params.higgs_values,
    )


def _trace_powers(a: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Tr A^k for every entry k of ``counts``."""
    matrix = np.atleast_2d(a)
    cache = {int(k): complex(np.trace(np.linalg.matrix_power(matrix, int(k)))) for k in np.unique(counts)}
    return np.array([cache[int(k)] for k in counts], dtype=np.complex128)


def _edge_law_section(plan: ExperimentPlan, m: np.ndarray, source: str, output: RunOutput) -> tuple[np.ndarray, float]:
    params = plan.params
    x_values = [
        x_of_g(params, g, m) if g != params.group.identity else 1.0
        for g in range(params.group.order)
    ]
    d_value, total = d_matrix(params, m, plan.d)
    positive = m[m > 0]
    output.observables["magnetization_source"] = source
    output.observables["x_of_g"] = {params.group.labels[g]: value for g, value in enumerate(x_values)}
    output.observables["d_matrix"] = _matrix(d_value)
    output.observables["d_weight_total"] = total
    output.observables["magnetization_min_probability"] = float(positive.min()) if positive.size else 0.0
    k, n = params.higgs.order, params.group.order
    rows = tuple(
        (p1, p2, params.group.labels[e1], params.group.labels[e2], float(m[p1, p2, e1, e2]))
        for p1 in range(k)
        for p2 in range(k)
        for e1 in range(n)
        for e2 in range(n)
    )
    output.tables.append(Table("edge_law", ("phi_tail", "phi_head", "eta_tail", "eta_head", "probability"), rows))
    return d_value, total


@dataclass(slots=True)
class RunExactOracle:
    executor: TaskExecutor

    def execute(self, plan: ExperimentPlan) -> RunOutput:
        lat, params = plan.lattice, plan.params
        output = RunOutput(subcommand="exact")
        EnumerationBudget(max_states=plan.max_states).check(state_count(lat, params))
        if params.kind not in (ModelKind.K_N, ModelKind.GAUGED_OUT):
            self._polymer_weights(plan, output)
        if params.kind is ModelKind.RANDOM_CURRENT:
            self._current_identities(plan, output)

        oracle = ExactOracle(lat, params, **_enumeration_options(plan, self.executor))
        output.observables["states"] = state_count(lat, params)
        output.observables["log_partition"] = oracle.log_partition()
        if params.kind is ModelKind.K_N:
            m = exact_kn_edge_law(params, lat, _reference_edge(plan), **_enumeration_options(plan, self.executor))
            _edge_law_section(plan, m, "exact", output)
        elif plan.loop is not None:
            self._wilson(plan, oracle, output)
        logger.info("[exact] %s: %d states enumerated", plan.name, oracle.budget.visited)
        return output

    def _wilson(self, plan: ExperimentPlan, oracle: ExactOracle, output: RunOutput) -> None:
        lat, params, loop = plan.lattice, plan.params, plan.loop
        observable = wilson_observable(params, loop)
        forward = oracle.expectation(observable)
        backward = oracle.expectation(observable, reverse=True)
        output.observables["wilson"] = _complex(forward)
        output.checks["wilson_orders_agree"] = bool(abs(forward - backward) <= MOMENT_TOLERANCE * max(1.0, abs(forward)))

        if state_count(lat, params) > PYTHON_STATE_LIMIT:
            output.notes.append("state space too large for per-configuration cross-checks")
            return
        reference = reference_expectation(
            params, lat, lambda cfg: wilson_loop_value(cfg.sigma, loop, params.rep), EnumerationBudget(plan.max_states)
        )
        output.observables["wilson_reference"] = _complex(reference)
        output.checks["wilson_reference_agrees"] = bool(abs(reference - forward) <= PHI_TOLERANCE)

        kind = plan.support or default_support_kind(params)
        counts = per_configuration(lambda cfg: count_minimal_on_loop(cfg, params, lat, loop, kind))
        output.observables["minimal_count_mean"] = float(oracle.expectation(counts).real)
        output.observables["minimal_count_zero_probability"] = oracle.event_probability(lambda batch: counts(batch) == 0)

    def _polymer_weights(self, plan: ExperimentPlan, output: RunOutput) -> None:
        lat, params = plan.lattice, plan.params
        options = _enumeration_options(plan, self.executor)
        deep = _deep_edges(lat)
        box = lat if deep else build_lattice([POLYMER_BOX_SIDE] * lat.d)
        edge = _pick_edge(plan, deep) if deep else _deep_edges(box)[0]
        vortex = minimal_vortex(box, edge)
        try:
            phi = float(exact_phi(params, box, vortex, **options))
        except BudgetExceededError:
            output.notes.append("minimal vortex weight skipped: its local enumeration is above the state budget")
            return
        closed = phi_minimal(params, lat.d)
        upper = float(exact_phi(params, box, vortex, PhiVariant.UPPER_BOUND))
        output.observables["phi_lattice"] = list(box.dims)
        output.observables["phi_edge"] = edge
        output.observables["phi_exact"] = phi
        output.observables["phi_closed_form"] = closed
        output.observables["phi_upper_bound"] = upper
        output.checks["phi_matches_closed_form"] = bool(abs(phi - closed) <= PHI_TOLERANCE * max(closed, 1e-300))
        output.checks["phi_below_upper_bound"] = bool(phi <= upper * (1 + PHI_TOLERANCE))

        if box is lat and plan.loop is not None and edge in plan.loop.edge_ids:
            nontrivial = float(exact_phi(params, lat, vortex, PhiVariant.NONTRIVIAL, plan.loop, **options))
            wilson = complex(exact_phi(params, lat, vortex, PhiVariant.WILSON, plan.loop, **options))
            output.observables["phi_nontrivial"] = nontrivial
            output.observables["phi_wilson"] = _complex(wilson)
            output.checks["phi_nontrivial_below_phi"] = bool(nontrivial <= phi * (1 + PHI_TOLERANCE))

        if params.group.is_abelian:
            self._phi_multiplicativity(plan, output)

        if state_count(lat, params) > PYTHON_STATE_LIMIT:
            return
        interior = [other for other in range(lat.n_edges) if is_interior_edge(lat, other)]
        if not interior:
            output.notes.append("no interior edge; vortex probability checks skipped")
            return
        if lat.d == 2:
            output.notes.append("G2 has no edges in two dimensions; minimal vortices never form a single component")
        local_edge = edge if box is lat else interior[0]
        local_vortex = minimal_vortex(lat, local_edge)
        local_phi = phi if box is lat else float(exact_phi(params, lat, local_vortex, **options))
        probability = ExactOracle(lat, params, **options).event_probability(
            per_configuration(contains_vortex(params, lat, local_vortex), dtype=bool)
        )
        output.observables["vortex_probability_edge"] = local_edge
        output.observables["vortex_probability"] = probability
        output.observables["phi_local"] = local_phi
        output.checks["vortex_probability_below_phi"] = bool(probability <= local_phi * (1 + PHI_TOLERANCE))
        if plan.loop is not None and not local_vortex.edges.isdisjoint(plan.loop.edge_ids):
            local_nontrivial = float(exact_phi(params, lat, local_vortex, PhiVariant.NONTRIVIAL, plan.loop, **options))
            nontrivial_probability = ExactOracle(lat, params, **options).event_probability(
                per_configuration(contains_nontrivial_vortex(params, lat, local_vortex, plan.loop), dtype=bool)
            )
            output.observables["phi_nontrivial_local"] = local_nontrivial
            output.observables["nontrivial_vortex_probability"] = nontrivial_probability
            output.checks["nontrivial_probability_below_phi_nontrivial"] = bool(
                nontrivial_probability <= local_nontrivial * (1 + PHI_TOLERANCE)
            )
        others =[other for other in interior if other != local_edge]
        if others:
            conditional = conditional_vortex_probability(params, lat, local_vortex, absent=others[:1], **options)
            output.observables["conditional_vortex_probability"] = conditional
            output.checks["conditional_probability_below_phi"] = bool(conditional <= local_phi * (1 + PHI_TOLERANCE))

    def _phi_multiplicativity(self, plan: ExperimentPlan, output: RunOutput) -> None:
        params = plan.params
        box = plan.lattice
        pair = compatible_minimal_pair(box)
        if pair is None:
            box = build_lattice([2 * POLYMER_BOX_SIDE] + [POLYMER_BOX_SIDE] * (box.d - 1))
            pair = compatible_minimal_pair(box)
        options = _enumeration_options(plan, self.executor)
        first, second = (minimal_vortex(box, edge) for edge in pair)
        try:
            joint = float(exact_phi(params, box, first.union(second), **options))
        except BudgetExceededError:
            output.notes.append("weight multiplicativity skipped: the joint enumeration is above the state budget")
            return
        product = float(exact_phi(params, box, first, **options)) * float(exact_phi(params, box, second, **options))
        output.observables["phi_pair_lattice"] = list(box.dims)
        output.observables["phi_pair_edges"] = list(pair)
        output.observables["phi_pair_joint"] = joint
        output.observables["phi_pair_product"] = product
        output.checks["phi_multiplicative"] = bool(abs(joint - product) <= PHI_TOLERANCE * max(product, 1e-300))

    def _current_identities(self, plan: ExperimentPlan, output: RunOutput) -> None:
        params = plan.params
        means = params.kappa * (params.edge_table + params.offset_c)
        cutoff = int(stats.poisson.isf(plan.current_tolerance, means.max())) + 1 if means.max() > 0 else 0
        captured = stats.poisson.cdf(cutoff, means)
        output.observables["current_cutoff"] = cutoff
        output.checks["current_sums_match_edge_weights"] = bool(np.all(np.abs(1.0 - captured) <= 1e-8))
        try:
            states, marginal = exact_current_marginal(
                params, plan.lattice, plan.current_tolerance, EnumerationBudget(max_states=PYTHON_STATE_LIMIT)
            )
        except BudgetExceededError:
            output.notes.append("current marginal enumeration skipped: state space too large")
            return
        direct_states, direct = gibbs_state_law(params, plan.lattice, **_enumeration_options(plan, self.executor))
        law = {tuple(row): p for row, p in zip(direct_states.tolist(), direct)}
        distance = 0.5 * sum(abs(p - law.get(tuple(row), 0.0)) for row, p in zip(states.tolist(), marginal))
        output.observables["current_marginal_tv"] = float(distance)
        output.checks["current_marginal_matches"] = bool(distance <= 1e-8)


@dataclass(slots=True)
class RunSampler:
    executor: TaskExecutor

    def execute(self, plan: ExperimentPlan) -> RunOutput:
        output = RunOutput(subcommand="sample")
        if plan.params.kind is ModelKind.K_N:
            seed = _require_seed(plan)
            samples = plan.magnetization_samples or plan.schedule.measurements
            m = magnetization_estimate(plan.lattice, plan.params, _reference_edge(plan), samples, plan.schedule, seed)
            _edge_law_section(plan, m, "sampled", output)
            return output
        self.describe(self.sample(plan), plan, output)
        return output

    def sample(self, plan: ExperimentPlan) -> SampleResult:
        seed = _require_seed(plan)
        if plan.loop is None:
            raise ConfigurationError("sampling measures a Wilson loop; the config needs a loop section")
        schedule = plan.schedule
        series = run_chains(
            plan.lattice,
            plan.params,
            plan.loop,
            schedule,
            seed,
            self.executor.map,
            support=plan.support,
            validate=plan.validate,
            max_growth=plan.separation_max_growth,
        )
        merged = ObservableSeries.merge(series)
        lam = plan.loop_length * phi_minimal(plan.params, plan.d)
        bootstrap_rng = make_rng(chain_seeds(seed, schedule.chains + 1)[-1])
        tv = tv_empirical(merged.minimal_counts, lam, bootstrap_rng, plan.bootstrap_resamples)
        a = a_matrix(plan.params.group, plan.params.rep, plan.params.beta, plan.d)
        traces = _trace_powers(a, merged.minimal_counts)
        return SampleResult(
            series=tuple(series),
            merged=merged,
            estimates=merged.estimates(schedule.batches),
            lam=lam,
            tv=tv,
            trace_estimate=batch_means(traces, schedule.batches),
        )

    def describe(self, result: SampleResult, plan: ExperimentPlan, output: RunOutput) -> None:
        merged = result.merged
        for name, estimate in result.estimates.items():
            output.observables[name] = _estimate(estimate)
        output.observables["acceptance_rate"] = merged.acceptance_rate
        output.observables["sweeps"] = merged.sweeps
        output.observables["minimal_count_histogram"] = np.bincount(merged.minimal_counts).tolist()
        output.observables["poisson_lambda"] = result.lam
        output.observables["tv_to_poisson"] = {"value": result.tv.value, "stderr": result.tv.stderr, "samples": result.tv.samples}
        output.checks["tv_sample_size_sufficient"] = result.tv.samples >= plan.tv_min_samples
        if result.trace_estimate is not None:
            output.observables["trace_a_power"] = _estimate(result.trace_estimate)
        if merged.checks is not None:
            output.observables["validated_samples"] = merged.checks.samples
            output.observables["monochrome_violations"] = merged.checks.violations
            output.observables["small_vortices"] = merged.checks.small_vortices
            output.observables["vortex_classes"] = dict(sorted(merged.checks.classes.items()))
            output.observables["knots_per_sample"] = merged.checks.knots / max(merged.checks.samples, 1)
            output.observables["loop_knots_per_sample"] = merged.checks.loop_knots / max(merged.checks.samples, 1)
            output.checks["monochrome_holds"] = merged.checks.violations == 0
            output.checks["no_small_vortices"] = merged.checks.small_vortices == 0
            output.notes.extend(merged.checks.notes[:20])

        rows = []
        for chain, part in enumerate(result.series):
            for index in range(len(part)):
                value = complex(part.wilson[index])
                rows.append((chain, index, value.real, value.imag, int(part.minimal_counts[index]), float(part.energy[index])))
        output.tables.append(
            Table("series", ("chain", "index", "wilson_re", "wilson_im", "minimal_count", "energy"), tuple(rows))
        )
        logger.info("[sample] %s: %d measurements, acceptance %.3f", plan.name, len(merged), merged.acceptance_rate)


@dataclass(slots=True)
class RunPredictor:
    executor: TaskExecutor

    def execute(self, plan: ExperimentPlan) -> RunOutput:
        output = RunOutput(subcommand="predict")
        prediction = self.predict(plan, output)
        output.predictions.update(
            {
                "phi_minimal": prediction.phi,
                "lambda": prediction.lam,
                "a_matrix": _matrix(prediction.a),
                "wilson_prediction": _complex(prediction.wilson),
                "chen_stein_bound": prediction.chen_stein,
            }
        )
        if prediction.d_value is not None:
            output.predictions["d_matrix"] = _matrix(prediction.d_value)
            output.predictions["d_lambda"] = prediction.d_lambda
            output.predictions["d_wilson_prediction"] = _complex(prediction.d_wilson)
        output.budgets = prediction.budget.to_dict()
        output.checks["budget_valid"] = prediction.budget.valid

        lam = prediction.lam
        top = max(10, int(stats.poisson.isf(1e-12, lam)) + 1) if lam > 0 else 10
        pmf = stats.poisson.pmf(np.arange(top + 1), lam) if lam > 0 else (np.arange(top + 1) == 0).astype(float)
        output.tables.append(Table("poisson", ("k", "probability"), tuple((k, float(p)) for k, p in enumerate(pmf))))
        if plan.vortex_count_max > 0:
            self._vortex_counts(plan, output)
        logger.info("[predict] %s: lambda=%.6g, budget valid=%s", plan.name, lam, prediction.budget.valid)
        return output

    def predict(self, plan: ExperimentPlan, output: RunOutput | None = None) -> Prediction:
        params, d, length = plan.params, plan.d, plan.loop_length
        phi = phi_minimal(params, d)
        lam = length * phi
        a = a_matrix(
            params.group,
            params.rep,
            params.beta,
            d,
            kappa=params.kappa if plan.kappa_corrected else None,
        )
        argument = a[0, 0] if params.rep.dim == 1 else a
        wilson = poisson_moment(argument, lam)
        if output is not None and lam <= MOMENT_SERIES_MAX_LAMBDA:
            series = poisson_moment_series(argument, lam)
            output.predictions["wilson_prediction_series"] = _complex(series)
            output.checks["moment_series_agrees"] = bool(abs(series - wilson) <= MOMENT_TOLERANCE * max(1.0, abs(wilson)))

        d_value = d_lambda = d_wilson = None
        min_probability = plan.min_probability
        if plan.magnetization is not MagnetizationSource.NONE:
            m = self._magnetization(plan)
            scratch = output if output is not None else RunOutput(subcommand="predict")
            d_value, total = _edge_law_section(plan, m, plan.magnetization.value, scratch)
            d_lambda = length * total
            d_wilson = poisson_moment(d_value[0, 0] if params.rep.dim == 1 else d_value, d_lambda)
            if min_probability is None:
                positive = m[m > 0]
                min_probability = float(positive.min()) if positive.size else None

        budget = theorem_budgets(
            params,
            length,
            plan.distance,
            d,
            decay_rate=plan.decay_rate,
            min_probability=min_probability,
            d_value=d_value,
        )
        b1, b2, b3 = toy_b_values(d, length, phi, budget.d_const)
        return Prediction(
            phi=phi,
            lam=lam,
            a=a,
            wilson=wilson,
            budget=budget,
            chen_stein=chen_stein(b1, b2, b3, lam),
            d_value=d_value,
            d_lambda=d_lambda,
            d_wilson=d_wilson,
        )

    def _magnetization(self, plan: ExperimentPlan) -> np.ndarray:
        kn = _kn_model(plan.params)
        edge = _reference_edge(plan)
        if plan.magnetization is MagnetizationSource.EXACT:
            return exact_kn_edge_law(kn, plan.lattice, edge, **_enumeration_options(plan, self.executor))
        seed = _require_seed(plan)
        samples = plan.magnetization_samples or plan.schedule.measurements
        return magnetization_estimate(plan.lattice, kn, edge, samples, plan.schedule, seed)

    def _vortex_counts(self, plan: ExperimentPlan, output: RunOutput) -> None:
        lat = plan.lattice
        centers = lat.coords[lat.plaquette_vertices].mean(axis=1)
        plaquette = int(np.argmin(np.abs(centers - np.asarray(lat.dims) / 2.0).sum(axis=1)))
        growth = dimension_constant(lat.d)
        rows = []
        previous = None
        for k in range(1, plan.vortex_count_max + 1):
            count = enumerate_vortices_containing(lat, plaquette, k, max_pairs=plan.vortex_enumeration_max_pairs)
            ratio = count / previous if previous else None
            rows.append((k, count, growth**k, ratio))
            previous = count
        output.tables.append(Table("vortex_counts", ("k", "count", "bound", "growth_ratio"), tuple(rows)))
        output.observables["vortex_count_growth"] = rows[-1][3]
        output.checks["vortex_counts_within_bound"] = all(count <= bound for _, count, bound, _ in rows)


@dataclass(slots=True)
class RunComparison:
    sampler: RunSampler
    predictor: RunPredictor

    def execute(self, plan: ExperimentPlan) -> RunOutput:
        if plan.params.kind is ModelKind.K_N:
            raise ConfigurationError("compare needs a model with a gauge field")
        output = RunOutput(subcommand="compare")
        result = self.sampler.sample(plan)
        sampled = RunOutput(subcommand="sample")
        self.sampler.describe(result, plan, sampled)
        output.absorb(sampled, "sample")
        prediction = self.predictor.predict(plan, output)
        output.budgets = prediction.budget.to_dict()

        wilson = result.estimates["wilson"]
        measured, sigma = complex(wilson.mean), wilson.stderr
        gap = abs(measured - prediction.wilson)
        if plan.params.kind in (ModelKind.TOY, ModelKind.GENERAL_ABELIAN, ModelKind.RANDOM_CURRENT):
            budget_value = prediction.budget.minimal_comparison_bound
        else:
            budget_value = prediction.budget.nonabelian_comparison_bound
        output.predictions["wilson_prediction"] = _complex(prediction.wilson)
        output.predictions["chen_stein_bound"] = prediction.chen_stein
        output.observables["wilson_gap"] = gap
        output.observables["wilson_budget"] = budget_value
        output.checks["within_budget"] = bool(gap <= budget_value + 3 * sigma) if prediction.budget.valid else None

        if prediction.d_wilson is not None:
            d_gap = abs(measured - prediction.d_wilson)
            output.predictions["d_wilson_prediction"] = _complex(prediction.d_wilson)
            output.observables["d_wilson_gap"] = d_gap
            bound = prediction.budget.higgs_comparison_bound
            valid = bound is not None and prediction.budget.valid
            output.checks["within_higgs_budget"] = bool(d_gap <= bound + 3 * sigma) if valid else None

        if result.trace_estimate is not None:
            output.observables["trace_a_power_gap"] = abs(measured - complex(result.trace_estimate.mean))

        tv = result.tv
        if tv.samples >= plan.tv_min_samples:
            output.checks["tv_within_chen_stein"] = bool(tv.value <= prediction.chen_stein + 2 * tv.stderr)
        else:
            output.checks["tv_within_chen_stein"] = None

        exact = None
        if state_count(plan.lattice, plan.params) <= plan.max_states:
            oracle = ExactOracle(plan.lattice, plan.params, **_enumeration_options(plan, self.sampler.executor))
            exact = oracle.expectation(wilson_observable(plan.params, plan.loop))
            output.observables["wilson_exact"] = _complex(exact)
            tolerance = 3 * sigma if sigma > 0 else MOMENT_TOLERANCE
            output.checks["matches_exact"] = bool(abs(measured - exact) <= tolerance)
        else:
            output.checks["matches_exact"] = None
            output.notes.append("lattice too large for exact comparison")

        output.tables.append(
            Table(
                "compare",
                ("measured_re", "measured_im", "stderr", "predicted_re", "predicted_im", "exact_re", "exact_im", "gap", "budget"),
                (
                    (
                        measured.real,
                        measured.imag,
                        sigma,
                        prediction.wilson.real,
                        prediction.wilson.imag,
                        None if exact is None else exact.real,
                        None if exact is None else exact.imag,
                        gap,
                        budget_value,
                    ),
                ),
            )
        )
        logger.info("[compare] %s: gap %.4g against budget %.4g", plan.name, gap, budget_value)
        return output


@dataclass(slots=True)
class RunPercolation:
    executor: TaskExecutor

    def execute(self, plan: ExperimentPlan) -> RunOutput:
        seed = _require_seed(plan)
        if plan.percolation is None:
            raise ConfigurationError("perc needs a percolation section in the config")
        perc = plan.percolation
        distances = tuple(sorted(perc.distances))
        profile = connectivity_decay_profile(
            plan.lattice,
            plan.params,
            perc.kappas,
            distances,
            perc.samples,
            plan.schedule,
            seed,
            self.executor.map,
        )
        output = RunOutput(subcommand="perc")
        output.observables["decay_rates"] = {str(kappa): rate for kappa, rate in profile.decay_rates.items()}
        output.observables["bond_probability"] = {str(kappa): p for kappa, p in profile.bond_p.items()}

        dominated = all(
            row.probability <= row.bond_probability + 3 * float(np.hypot(row.stderr, row.bond_stderr))
            for row in profile.rows
        )
        decreasing = True
        for kappa in perc.kappas:
            block = [row.probability for row in profile.rows if row.kappa == float(kappa)]
            decreasing &= all(later <= earlier for earlier, later in zip(block, block[1:]))
        output.checks["dominated_by_bond_percolation"] = dominated
        output.checks["decreasing_in_distance"] = decreasing
        output.tables.append(
            Table(
                "decay",
                ("kappa", "distance", "probability", "stderr", "bond_probability", "bond_stderr"),
                tuple(
                    (row.kappa, row.distance, row.probability, row.stderr, row.bond_probability, row.bond_stderr)
                    for row in profile.rows
                ),
            )
        )
        return output


@dataclass(slots=True)
class PublishReport:
    writer: ReportWriter

    def execute(
        self,
        directory: Path,
        report: Mapping[str, Any],
        output: RunOutput,
        timing: Mapping[str, float],
    ) -> list[Path]:
        written = [self.writer.write_report(directory, report)]
        written += [self.writer.write_table(directory, table) for table in output.tables]
        written.append(self.writer.write_timing(directory, timing))
        logger.info("[report] wrote %d files to %s", len(written), directory)
        return written
