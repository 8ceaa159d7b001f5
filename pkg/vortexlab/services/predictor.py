"""Leading-order predictions, Poisson laws, Chen-Stein bounds and error budgets.

All vortex weights use the suppressing sign, ``exp[4(d-1) beta Re(Tr rho(g) - D)]``
with ``Re(Tr rho(g) - D) <= 0``; ``d = 4`` reproduces the 12 beta weighting.
Universal constants hidden in order-of-magnitude bounds are taken as 1.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from math import e as EULER

import numpy as np
from scipy import linalg, stats

from vortexlab.domain.groups import FiniteGroup, UnitaryRep
from vortexlab.domain.value_objects import ModelParams
from vortexlab.exceptions import ValidationError
from vortexlab.services.statistics import bootstrap_std

logger = logging.getLogger(__name__)

KNOT_COUNT = 10.0**24
SERIES_TOLERANCE = 1e-14


def dimension_constant(d: int) -> float:
    """C(d): growth rate of vortex counts, 20e for d = 4."""
    return EULER * max(1.0, 10.0 * (d - 2))


def _excitation_gap(rep: UnitaryRep) -> float:
    """min over a != 1 of Re(D - Tr rho(a)); equals rho(1) - rho(-1) for Z2."""
    return -rep.max_excitation()


def minimal_vortex_weights(group: FiniteGroup, rep: UnitaryRep, beta: float, d: int = 4) -> np.ndarray:
    """w_g = exp[4(d-1) beta Re(Tr rho(g) - D)], zero at the identity."""
    weights = np.exp(4 * (d - 1) * beta * (rep.re_traces - rep.dim))
    weights[group.identity] = 0.0
    return weights


def higgs_factors(params: ModelParams) -> np.ndarray:
    """exp[kappa (F[g, 1] - F[1, 1])]: cost of exciting one edge to g with flat Higgs field."""
    column = params.edge_table[:, 0]
    return np.exp(params.kappa * (column - column[params.group.identity]))


def phi_minimal(params: ModelParams, d: int = 4, *, include_higgs: bool = True) -> float:
    weights = minimal_vortex_weights(params.group, params.rep, params.beta, d)
    if include_higgs:
        weights = weights * higgs_factors(params)
    return float(weights.sum())


def a_matrix(
    group: FiniteGroup,
    rep: UnitaryRep,
    beta: float,
    d: int = 4,
    *,
    kappa: float | None = None,
) -> np.ndarray:
    """Weighted average of rho(g) over g != 1.

    With ``kappa`` set each weight also carries exp[2 kappa Re(Tr rho(g) - D)].
    """
    weights = minimal_vortex_weights(group, rep, beta, d)
    if kappa is not None:
        weights = weights * np.exp(2 * kappa * (rep.re_traces - rep.dim))
        weights[group.identity] = 0.0
    total = weights.sum()
    if total == 0.0:
        return np.eye(rep.dim, dtype=np.complex128)
    return np.einsum("g,gij->ij", weights, rep.matrices) / total


def _check_magnetization(params: ModelParams, magnetization: np.ndarray) -> np.ndarray:
    table = np.asarray(magnetization, dtype=np.float64)
    k, n = params.higgs.order, params.group.order
    if table.shape != (k, k, n, n):
        raise ValidationError(f"magnetization table must have shape {(k, k, n, n)}, got {table.shape}")
    if np.any(table < -1e-15) or abs(table.sum() - 1.0) > 1e-9:
        raise ValidationError("magnetization table is not a probability table")
    return table


def x_of_g(params: ModelParams, g: int, magnetization: np.ndarray) -> float:
    """Relative change of the Higgs action for sigma_e = g, averaged under m.

    sum m(p1, p2, n1, n2) exp[kappa (F[n1 g n2^-1, p1 p2^-1] - F[n1 n2^-1, p1 p2^-1])]

    The exponent is excited minus flat, so with the ground-maximizing tables
    used here X(g) <= 1 whenever the flat link carries the edge-table maximum.
    This is the reverse of the X >= 1 reading of the single-term example,
    which is written with the opposite sign convention. No cap is applied:
    a law whose mass sits on already excited links gives X(g) > 1.
    """
    table = _check_magnetization(params, magnetization)
    group = params.group
    k, n = params.higgs.order, group.order
    p1, p2, n1, n2 = np.meshgrid(np.arange(k), np.arange(k), np.arange(n), np.arange(n), indexing="ij")
    h = (p1 - p2) % k
    excited = group.table[group.table[n1, g], group.inverse[n2]]
    flat = group.table[n1, group.inverse[n2]]
    change = params.edge_table[excited, h] - params.edge_table[flat, h]
    return float(np.sum(table * np.exp(params.kappa * change)))


def d_matrix(params: ModelParams, magnetization: np.ndarray, d: int = 4) -> tuple[np.ndarray, float]:
    """D_{beta,kappa} and its total weight sum_{g != 1} w_g X(g)."""
    group, rep = params.group, params.rep
    weights = minimal_vortex_weights(group, rep, params.beta, d)
    x = np.array([x_of_g(params, g, magnetization) if g != group.identity else 0.0 for g in range(group.order)])
    weighted = weights * x
    total = float(weighted.sum())
    if total == 0.0:
        return np.eye(rep.dim, dtype=np.complex128), 0.0
    return np.einsum("g,gij->ij", weighted, rep.matrices) / total, total


def poisson_moment(a: complex | np.ndarray, lam: float) -> complex:
    """E[a^X] (scalar) or E[Tr A^X] (matrix) for X ~ Poisson(lam)."""
    if lam < 0:
        raise ValidationError("Poisson parameter must be non-negative")
    matrix = np.asarray(a, dtype=np.complex128)
    if matrix.ndim == 0:
        return complex(np.exp(lam * (complex(matrix) - 1.0)))
    identity = np.eye(matrix.shape[0], dtype=np.complex128)
    return complex(np.trace(linalg.expm(lam * (matrix - identity))))


def poisson_moment_series(a: complex | np.ndarray, lam: float, tolerance: float = SERIES_TOLERANCE) -> complex:
    """Truncated sum over k of P(X = k) Tr A^k, stopping once the Poisson tail is below ``tolerance``."""
    matrix = np.asarray(a, dtype=np.complex128)
    scalar = matrix.ndim == 0
    if scalar:
        matrix = matrix.reshape(1, 1)
    cutoff = int(stats.poisson.isf(tolerance, lam)) + 1 if lam > 0 else 0
    power = np.eye(matrix.shape[0], dtype=np.complex128)
    total = 0j
    for k, mass in enumerate(stats.poisson.pmf(np.arange(cutoff + 1), lam)):
        if k:
            power = power @ matrix
        total += mass * np.trace(power)
    return complex(total)


def chen_stein(b1: float, b2: float, b3: float, lam: float) -> float:
    if min(b1, b2, b3) < 0:
        raise ValidationError("Chen-Stein constants must be non-negative")
    if b1 == b2 == b3 == 0:
        return 0.0
    if lam <= 0:
        return 1.0
    return min(1.0, 1.0 / lam) * (b1 + b2) + min(1.0, 1.4 / np.sqrt(lam)) * b3


def toy_b_values(d: int, loop_length: int, phi: float, d_const: float) -> tuple[float, float, float]:
    """(b1, b2, b3) for the abelian low-disorder count of minimal vortices."""
    cd = dimension_constant(d)
    b1 = 8 * (d - 1) * loop_length * phi**2
    denominator = 1 - 2 * (d - 1) * cd * d_const
    b3 = 2 * loop_length * phi * (d - 1) * cd * d_const / denominator if denominator > 0 else float("inf")
    return b1, 0.0, b3


@dataclass(frozen=True, slots=True)
class TVEstimate:
    value: float
    stderr: float
    samples: int


def tv_distance(samples: np.ndarray, lam: float) -> float:
    """Half the L1 distance between the empirical law and Poisson(lam), tail beyond the sample maximum included."""
    samples = np.asarray(samples, dtype=np.int64)
    top = int(samples.max()) if samples.size else 0
    empirical = np.bincount(samples, minlength=top + 1) / max(samples.size, 1)
    ks = np.arange(top + 1)
    law = stats.poisson.pmf(ks, lam) if lam > 0 else (ks == 0).astype(np.float64)
    tail = float(stats.poisson.sf(top, lam)) if lam > 0 else 0.0
    return 0.5 * float(np.abs(empirical - law).sum() + tail)


def tv_empirical(
    samples: np.ndarray,
    lam: float,
    rng: np.random.Generator | None = None,
    resamples: int = 200,
) -> TVEstimate:
    samples = np.asarray(samples, dtype=np.int64)
    value = tv_distance(samples, lam)
    stderr = 0.0 if rng is None else bootstrap_std(samples, lambda draw: tv_distance(draw, lam), rng, resamples)
    return TVEstimate(value=value, stderr=stderr, samples=int(samples.size))


@dataclass(frozen=True, slots=True)
class ErrorBudget:
    d: int
    loop_length: int
    distance: int
    c_dimension: float
    c1: float
    d_const: float
    phi_minimal: float
    lam: float
    alpha: float
    knot_constant: float
    upper_bound_constant: float
    decorrelation_constant: float
    comparison_constant: float
    reduction_bound: float
    minimal_comparison_bound: float
    tv_budget_toy: float
    low_disorder_complement: float
    nonabelian_comparison_bound: float
    knot_phi_bound_six: float
    phi_nt_bound: float
    phi_ub_minimal_bound: float
    rare_event_bound: float
    higgs_comparison_bound: float | None = None
    higgs_lambda: float | None = None
    flags: dict[str, bool] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict[str, object]:
        return asdict(self)

    def knot_phi_bound(self, pairs: int) -> float:
        """Phi(K) <= alpha^k for a knot of k plaquette pairs."""
        return self.alpha**pairs


def _finite(value: float) -> float:
    return float(value) if np.isfinite(value) else float("inf")


def theorem_budgets(
    params: ModelParams,
    loop_length: int,
    distance: int,
    d: int = 4,
    *,
    decay_rate: float | None = None,
    min_probability: float | None = None,
    d_value: complex | np.ndarray | None = None,
) -> ErrorBudget:
    """Evaluate every constant and right-hand side of the three Wilson-loop comparison bounds.

    The Higgs comparison bound needs an empirical decay rate and a minimal
    K_N probability; without them it is reported as None. Invalid regimes
    are flagged, never raised.
    """
    rep, group = params.rep, params.group
    beta, kappa = params.beta, params.kappa
    gap = _excitation_gap(rep)
    cd = dimension_constant(d)
    f = params.f_table
    f_ground = float(f[group.identity, 0])
    f_others = np.delete(f.ravel(), group.identity * f.shape[1])
    f_margin = f_ground - float(f_others.max()) if f_others.size else 0.0

    x_gauge = np.exp(-2 * beta * gap)
    x_higgs = np.exp(-kappa / (d - 1) * f_margin)
    c1 = 2**8 * max(x_gauge, x_higgs)

    def _ratio(x: float) -> float:
        denominator = 1 - 2**8 * cd * x
        return x / denominator if denominator > 0 else float("inf")

    d_const = max(_ratio(x_gauge), _ratio(x_higgs))
    phi = phi_minimal(params, d)
    lam = loop_length * phi

    reduction = 2 * (d - 1) * loop_length * (2**8 * cd) ** (2 * (d - 1) + 1) * np.exp(-4 * (d - 1) * beta * gap) * d_const
    b1, _, b3 = toy_b_values(d, loop_length, phi, d_const)
    tv_toy = b1 + 2 * b3
    minimal_comparison = tv_toy + reduction

    spread_edge = float(params.edge_table.max()) + params.offset_c
    spread_f = float(f.max() - f.min())
    plaquette_factor = np.exp(2 * beta * rep.max_excitation())
    knot_term = (kappa * spread_edge * np.exp(kappa * spread_edge)) ** (1.0 / 56.0) if kappa > 0 else 0.0
    alpha = 2**4 * group.order * max(plaquette_factor, knot_term)
    scaled = KNOT_COUNT * alpha
    knot_constant = 6 * scaled**6 / (1 - scaled) if scaled < 1 else float("inf")

    rare = (rep.dim * group.order * loop_length * np.exp(4 * (d - 1) * beta * rep.max_excitation())
            / (1 - scaled) ** 5) if scaled < 1 else float("inf")
    nonabelian_comparison = rare + loop_length * phi**2 + 2 * knot_constant * loop_length * phi

    upper_bound_constant = group.order**4 * plaquette_factor * np.exp(8 * kappa * spread_f)
    decorrelation_constant = float(group.order) ** 24 * float(params.higgs.order) ** 24 * np.exp(96 * kappa * spread_f)
    comparison_constant = 12 * distance**4 * upper_bound_constant**6
    box = (2 * distance) ** d
    cb = cd * upper_bound_constant
    low_disorder = (loop_length * box * cb ** (2 * (d - 1) + 1) / (1 - cb) if cb < 1 else float("inf"))
    low_disorder += loop_length * box * upper_bound_constant ** (4 * (d - 1))

    knot6 = (2**4 * group.order) ** 6 * np.exp(12 * beta * rep.max_excitation())
    phi_nt = knot6  # k = 6 pairs; larger knots pick up alpha^(k-6)

    higgs_comparison = None
    higgs_lambda = None
    if d_value is not None:
        d_scalar = complex(np.trace(np.atleast_2d(d_value)) / np.atleast_2d(d_value).shape[0])
        higgs_lambda = lam
        if decay_rate is not None and min_probability is not None and min_probability > 0:
            c = c_prime = decay_rate
            leak = distance**3 * np.exp(-c * distance) * decorrelation_constant
            b3_term = 2 * loop_length * abs((1 - comparison_constant) * (d_scalar - leak) - (d_scalar + leak))
            six = upper_bound_constant**6
            with np.errstate(over="ignore"):
                decor = loop_length**2 * six * decorrelation_constant * distance**3 * np.exp(-c * distance) * np.exp(six * loop_length * decorrelation_constant)
                tail = ((loop_length * six * (1 + np.exp(-c_prime * distance)) * decorrelation_constant * np.exp(-c_prime * distance))
                        / min_probability
                        * np.exp(loop_length * six * (1 + np.exp(-c_prime) * distance) * decorrelation_constant))
            higgs_comparison = _finite(12 * loop_length * distance**4 * upper_bound_constant**12 + low_disorder + b3_term + decor + tail)

    flags = {
        "c_dimension_c1_below_one": bool(cd * c1 < 1),
        "reduction_denominator_positive": bool(2 * (d - 1) * cd * d_const < 1),
        "knot_alpha_small": bool(scaled < 1),
        "knot_constant_below_one": bool(knot_constant < 1),
        "comparison_constant_below_one": bool(comparison_constant < 1),
        "c_dimension_upper_bound_constant_below_one": bool(cb < 1),
    }
    for name, ok in flags.items():
        if not ok:
            logger.warning("[!] Budget precondition %s fails at beta=%.4g kappa=%.4g", name, beta, kappa)

    return ErrorBudget(
        d=d,
        loop_length=loop_length,
        distance=distance,
        c_dimension=cd,
        c1=float(c1),
        d_const=_finite(d_const),
        phi_minimal=phi,
        lam=lam,
        alpha=float(alpha),
        knot_constant=_finite(knot_constant),
        upper_bound_constant=float(upper_bound_constant),
        decorrelation_constant=_finite(decorrelation_constant),
        comparison_constant=_finite(comparison_constant),
        reduction_bound=_finite(reduction),
        minimal_comparison_bound=_finite(minimal_comparison),
        tv_budget_toy=_finite(tv_toy),
        low_disorder_complement=_finite(low_disorder),
        nonabelian_comparison_bound=_finite(nonabelian_comparison),
        knot_phi_bound_six=float(knot6),
        phi_nt_bound=float(phi_nt),
        phi_ub_minimal_bound=float(upper_bound_constant ** (2 * (d - 1))),
        rare_event_bound=_finite(rare),
        higgs_comparison_bound=higgs_comparison,
        higgs_lambda=higgs_lambda,
        flags=flags,
    )


def phi_nt_bound(budget: ErrorBudget, pairs: int) -> float:
    """Wilson-nontrivial knot weight bound (2^4|G|)^6 exp[12 beta max Re(...)] alpha^(k-6)."""
    return budget.knot_phi_bound_six * budget.alpha ** max(pairs - 6, 0)
