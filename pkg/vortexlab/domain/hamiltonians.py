"""Energy functionals, local update deltas and the Wilson loop.

Every measure is ``mu ~ exp[H]`` with each excitation term non-positive, so
normalized energies are ``<= 0`` and vanish exactly on ground configurations.
Plaquette and edge sums run over unoriented cells with both orientations
folded in: a plaquette contributes ``2 beta (Re Tr rho(d sigma) - D)`` and an
edge ``kappa (F[sigma_e, h_e] - F[1, 1])`` where ``F`` is the paired f-table.
"""
from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy import stats
from scipy.special import gammaln, xlogy

from vortexlab.domain.groups import (
    FiniteGroup,
    HiggsGroup,
    UnitaryRep,
    higgs_quotient,
    plaquette_products,
    scalar_subgroup_X,
)
from vortexlab.domain.lattice import Lattice, Loop, gauge_transform
from vortexlab.domain.value_objects import (
    Configuration,
    EdgeUpdate,
    EtaUpdate,
    HiggsUpdate,
    ModelKind,
    ModelParams,
    SiteUpdate,
)
from vortexlab.exceptions import ConfigurationError, NotFoundError, ValidationError

logger = logging.getLogger(__name__)


def toy_f_table(e1: float, e2: float, e3: float, e4: float) -> np.ndarray:
    """f(1,1)=E1, f(1,-1)=E2, f(-1,1)=E3, f(-1,-1)=E4 on Z2 x Z2."""
    return np.array([[e1, e2], [e3, e4]], dtype=np.float64)


def representation_f_table(rep: UnitaryRep, higgs: HiggsGroup) -> np.ndarray:
    """f(g, h) = Re(h Tr rho(g)); the paired table is 2 Re[phi_x Tr rho(g) phi_y^-1]."""
    return (higgs.phases[None, :] * rep.traces[:, None]).real


def make_model(
    kind: ModelKind | str,
    group: FiniteGroup,
    rep: UnitaryRep,
    higgs: HiggsGroup,
    beta: float,
    kappa: float,
    *,
    energies: Sequence[float] | None = None,
    f_table: np.ndarray | None = None,
    quotient: bool = False,
    offset_c: float | None = None,
) -> ModelParams:
    kind = ModelKind(kind)
    if kind is ModelKind.TOY:
        if energies is None:
            raise ConfigurationError("the toy model needs energies E1..E4")
        table = toy_f_table(*energies)
    elif f_table is not None:
        table = np.asarray(f_table, dtype=np.float64)
    else:
        table = representation_f_table(rep, higgs)

    higgs_values: tuple[int, ...] | None = None
    if quotient:
        higgs_values = higgs_quotient(higgs, scalar_subgroup_X(rep)).representatives
    params = ModelParams(
        kind=kind,
        group=group,
        rep=rep,
        higgs=higgs,
        beta=float(beta),
        kappa=float(kappa),
        f_table=table,
        higgs_values=higgs_values,
    )
    if kind is ModelKind.GAUGED_OUT:
        _check_gauged_out(params)
    if kind is ModelKind.RANDOM_CURRENT:
        params = params.with_offset(choose_offset_c(params) if offset_c is None else offset_c)
    return params


def _check_gauged_out(params: ModelParams) -> None:
    if not params.group.is_abelian or params.rep.dim != 1:
        raise ValidationError("gauging out the Higgs field needs an abelian group with a 1-d representation")
    _eta_for_phase(params.rep, params.higgs)


def higgs_phases(lat: Lattice, params: ModelParams, phi: np.ndarray) -> np.ndarray:
    """h_e = phi_tail phi_head^{-1} for every edge (batch axes kept)."""
    return (phi[..., lat.edge_tail] - phi[..., lat.edge_head]) % params.higgs.order


def plaquette_term(lat: Lattice, params: ModelParams, sigma: np.ndarray) -> np.ndarray | float:
    if params.beta == 0.0:
        return np.zeros(sigma.shape[:-1]) if sigma.ndim > 1 else 0.0
    products = plaquette_products(lat, params.group, sigma)
    excess = params.rep.re_traces[products] - params.rep.dim
    return 2.0 * params.beta * excess.sum(axis=-1)


def higgs_term(lat: Lattice, params: ModelParams, sigma: np.ndarray, phi: np.ndarray) -> np.ndarray | float:
    h = higgs_phases(lat, params, phi)
    excess = params.edge_table[sigma, h] - params.ground_edge_energy
    return params.kappa * excess.sum(axis=-1)


def general_energy(cfg: Configuration, params: ModelParams, lat: Lattice) -> float:
    if cfg.sigma.shape[-1] != lat.n_edges:
        raise ValidationError("gauge field does not match the lattice")
    return float(plaquette_term(lat, params, cfg.sigma) + higgs_term(lat, params, cfg.sigma, cfg.phi))


def toy_energy(cfg: Configuration, params: ModelParams, lat: Lattice) -> float:
    if params.group.order != 2 or params.higgs.order != 2:
        raise ValidationError("toy energy needs Z2 gauge and Z2 Higgs fields")
    return general_energy(cfg, params, lat)


def gauged_out_energy(sigma: np.ndarray, params: ModelParams, lat: Lattice, *, normalized: bool = True) -> float:
    """Energy of the gauged-out model; its Higgs edge term is 2 kappa Re rho(sigma_e).

    ``normalized=False`` returns the pre-subtraction form, equal to
    ``2 kappa |E| + 2 beta |P|`` on the identity configuration.
    """
    if not params.group.is_abelian or params.rep.dim != 1:
        raise ValidationError("gauged-out energy needs an abelian group with a 1-d representation")
    edge_values = 2.0 * params.rep.re_traces[sigma]
    products = plaquette_products(lat, params.group, sigma)
    plaquette_values = 2.0 * params.rep.re_traces[products]
    if not normalized:
        return float(params.kappa * edge_values.sum() + params.beta * plaquette_values.sum())
    return float(params.kappa * (edge_values - 2.0).sum() + params.beta * (plaquette_values - 2.0).sum())


def _eta_for_phase(rep: UnitaryRep, higgs: HiggsGroup) -> np.ndarray:
    """Element eta_h with rho(eta_h) = h I for every Higgs phase h."""
    values = [rep.scalar_value(g) for g in range(rep.group.order)]
    scalars = np.array([np.nan if c is None else c for c in values], dtype=np.complex128)
    lookup = np.empty(higgs.order, dtype=np.int64)
    for j, phase in enumerate(higgs.phases):
        matches = np.nonzero(np.abs(scalars - phase) < 1e-9)[0]
        if matches.size == 0:
            raise NotFoundError(f"no group element represents the Higgs phase {j}/{higgs.order}")
        lookup[j] = matches[0]
    return lookup


def gauge_out_higgs(cfg: Configuration, params: ModelParams, lat: Lattice) -> np.ndarray:
    """F_phi(sigma): sigma_e -> eta_x sigma_e eta_y^{-1} with rho(eta_v) = phi_v."""
    eta = _eta_for_phase(params.rep, params.higgs)[cfg.phi]
    return gauge_transform(lat, params.group, cfg.sigma, eta)


def loop_holonomy(group: FiniteGroup, sigma: np.ndarray, loop: Loop) -> np.ndarray | int:
    result = np.full(sigma.shape[:-1], group.identity, dtype=np.int64)
    for edge, sign in loop.edges:
        value = sigma[..., edge] if sign > 0 else group.inverse[sigma[..., edge]]
        result = group.table[result, value]
    return result


def wilson_loop_values(rep: UnitaryRep, sigma: np.ndarray, loop: Loop) -> np.ndarray:
    return rep.traces[loop_holonomy(rep.group, sigma, loop)]


def wilson_loop_value(sigma: np.ndarray, loop: Loop, rep: UnitaryRep) -> complex:
    return complex(wilson_loop_values(rep, sigma, loop))


def kn_energy(eta: np.ndarray, phi: np.ndarray, params: ModelParams, lat: Lattice) -> np.ndarray | float:
    """kappa * sum over unoriented edges of F[eta_x eta_y^{-1}, phi_x phi_y^{-1}], not ground-subtracted."""
    group = params.group
    ratio = group.table[eta[..., lat.edge_tail], group.inverse[eta[..., lat.edge_head]]]
    h = higgs_phases(lat, params, phi)
    value = params.kappa * params.edge_table[ratio, h].sum(axis=-1)
    return float(value) if np.ndim(value) == 0 else value


def choose_offset_c(params: ModelParams) -> float:
    return max(0.0, 1.0 - float(params.edge_table.min()))


def current_cutoff(mean: float, tolerance: float) -> int:
    """Smallest n with P(Poisson(mean) > n) < tolerance."""
    if mean <= 0:
        return 0
    return int(stats.poisson.isf(tolerance, mean)) + 1


def current_means(lat: Lattice, params: ModelParams, sigma: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Poisson mean kappa (g_e + c) of the current on every edge."""
    values = params.edge_table[sigma, higgs_phases(lat, params, phi)] + params.offset_c
    if np.any(values <= 0):
        raise ValidationError("g_e + c must be positive; choose a larger offset c")
    return params.kappa * values


def random_current_log_weight(cfg: Configuration, params: ModelParams, lat: Lattice) -> float:
    if cfg.currents is None:
        raise ValidationError("random-current weight needs a current field")
    means = current_means(lat, params, cfg.sigma, cfg.phi)
    currents = cfg.currents
    edge_part = xlogy(currents, means) - gammaln(currents + 1)
    return float(plaquette_term(lat, params, cfg.sigma) + edge_part.sum())


def model_energy(cfg: Configuration, params: ModelParams, lat: Lattice) -> float:
    """Log-weight of ``cfg`` under the model's own measure, up to a constant."""
    if params.kind is ModelKind.K_N:
        if cfg.eta is None:
            raise ValidationError("the K_N model needs an eta field")
        return float(kn_energy(cfg.eta, cfg.phi, params, lat))
    if params.kind is ModelKind.RANDOM_CURRENT and cfg.currents is not None:
        return random_current_log_weight(cfg, params, lat)
    if params.kind is ModelKind.GAUGED_OUT:
        return gauged_out_energy(cfg.sigma, params, lat)
    return general_energy(cfg, params, lat)


def _oriented_product(group: FiniteGroup, members: np.ndarray) -> np.ndarray:
    first = group.table[members[..., 0], members[..., 1]]
    second = group.table[first, group.inverse[members[..., 2]]]
    return group.table[second, group.inverse[members[..., 3]]]


def _edge_log_weight(
    params: ModelParams,
    gauge_value: np.ndarray,
    h: np.ndarray,
    currents: np.ndarray | None,
) -> np.ndarray:
    values = params.edge_table[gauge_value, h]
    if currents is None:
        return params.kappa * values
    return xlogy(currents, params.kappa * (values + params.offset_c))


def _uses_currents(cfg: Configuration, params: ModelParams) -> np.ndarray | None:
    if params.kind is ModelKind.RANDOM_CURRENT:
        return cfg.currents
    return None


def edge_update_deltas(
    cfg: Configuration,
    params: ModelParams,
    lat: Lattice,
    edges: np.ndarray,
    values: np.ndarray,
) -> np.ndarray:
    """Energy change for setting ``sigma[edges[m]]`` to each of ``values[m, :]``.

    Edges in one call must not share a plaquette.
    """
    edges = np.asarray(edges, dtype=np.int64)
    values = np.asarray(values, dtype=np.int64).reshape(edges.size, -1)
    n_edges, n_values = values.shape
    group = params.group
    deltas = np.zeros((n_edges, n_values))

    if params.beta != 0.0:
        plaquettes = lat.edge_plaquettes[edges]
        valid = plaquettes >= 0
        members = cfg.sigma[lat.plaquette_edges[np.where(valid, plaquettes, 0)]]
        old = params.rep.re_traces[_oriented_product(group, members)]
        width = plaquettes.shape[1]
        trial = np.broadcast_to(members[:, None], (n_edges, n_values, width, 4)).copy()
        slots = np.broadcast_to(lat.edge_plaquette_pos[edges][:, None, :, None], (n_edges, n_values, width, 1))
        np.put_along_axis(
            trial,
            np.where(slots < 0, 0, slots),
            np.broadcast_to(values[:, :, None, None], (n_edges, n_values, width, 1)),
            axis=3,
        )
        new = params.rep.re_traces[_oriented_product(group, trial)]
        deltas += 2.0 * params.beta * ((new - old[:, None, :]) * valid[:, None, :]).sum(axis=-1)

    if params.kappa != 0.0:
        h = ((cfg.phi[lat.edge_tail[edges]] - cfg.phi[lat.edge_head[edges]]) % params.higgs.order)
        currents = _uses_currents(cfg, params)
        edge_currents = None if currents is None else currents[edges]
        old_weight = _edge_log_weight(params, cfg.sigma[edges], h, edge_currents)
        new_weight = _edge_log_weight(
            params,
            values,
            h[:, None],
            None if edge_currents is None else edge_currents[:, None],
        )
        deltas += new_weight - old_weight[:, None]
    return deltas


def vertex_update_deltas(
    cfg: Configuration,
    params: ModelParams,
    lat: Lattice,
    vertices: np.ndarray,
    values: np.ndarray,
    *,
    field: str = "phi",
) -> np.ndarray:
    """Energy change for setting ``phi`` (or ``eta``) at ``vertices[m]`` to ``values[m, :]``.

    Vertices in one call must not be neighbours.
    """
    vertices = np.asarray(vertices, dtype=np.int64)
    values = np.asarray(values, dtype=np.int64).reshape(vertices.size, -1)
    if params.kappa == 0.0:
        return np.zeros(values.shape)
    group = params.group
    k = params.higgs.order
    incident = lat.vertex_edges[vertices]
    valid = incident >= 0
    edges = np.where(valid, incident, 0)
    tails = lat.edge_tail[edges]
    heads = lat.edge_head[edges]
    is_tail = (tails == vertices[:, None])[:, None, :]

    currents = _uses_currents(cfg, params)
    edge_currents = None if currents is None else currents[edges][:, None, :]
    trial_values = values[:, :, None]

    if field == "phi":
        old_h = (cfg.phi[tails] - cfg.phi[heads]) % k
        new_h = np.where(is_tail, trial_values - cfg.phi[heads][:, None, :], cfg.phi[tails][:, None, :] - trial_values) % k
        if params.kind is ModelKind.K_N:
            if cfg.eta is None:
                raise ValidationError("the K_N model needs an eta field")
            gauge = group.table[cfg.eta[tails], group.inverse[cfg.eta[heads]]]
        else:
            gauge = cfg.sigma[edges]
        old_weight = _edge_log_weight(params, gauge, old_h, None if edge_currents is None else edge_currents[:, 0])
        new_weight = _edge_log_weight(params, gauge[:, None, :], new_h, edge_currents)
    elif field == "eta":
        if cfg.eta is None:
            raise ValidationError("eta updates need an eta field")
        h = (cfg.phi[tails] - cfg.phi[heads]) % k
        old_gauge = group.table[cfg.eta[tails], group.inverse[cfg.eta[heads]]]
        new_gauge = np.where(
            is_tail,
            group.table[trial_values, group.inverse[cfg.eta[heads]][:, None, :]],
            group.table[cfg.eta[tails][:, None, :], group.inverse[trial_values]],
        )
        old_weight = _edge_log_weight(params, old_gauge, h, None)
        new_weight = _edge_log_weight(params, new_gauge, h[:, None, :], None)
    else:
        raise ValueError(f"unknown vertex field {field!r}")
    return ((new_weight - old_weight[:, None, :]) * valid[:, None, :]).sum(axis=-1)


def energy_delta(cfg: Configuration, params: ModelParams, lat: Lattice, update: SiteUpdate) -> float:
    if isinstance(update, EdgeUpdate):
        return float(edge_update_deltas(cfg, params, lat, np.array([update.edge]), np.array([[update.value]]))[0, 0])
    if isinstance(update, HiggsUpdate):
        return float(
            vertex_update_deltas(cfg, params, lat, np.array([update.vertex]), np.array([[update.value]]))[0, 0]
        )
    if isinstance(update, EtaUpdate):
        return float(
            vertex_update_deltas(
                cfg, params, lat, np.array([update.vertex]), np.array([[update.value]]), field="eta"
            )[0, 0]
        )
    raise TypeError(f"unsupported update {update!r}")


def apply_update(cfg: Configuration, update: SiteUpdate) -> None:
    if isinstance(update, EdgeUpdate):
        cfg.sigma[update.edge] = update.value
    elif isinstance(update, HiggsUpdate):
        cfg.phi[update.vertex] = update.value
    elif isinstance(update, EtaUpdate):
        if cfg.eta is None:
            raise ValidationError("eta updates need an eta field")
        cfg.eta[update.vertex] = update.value
