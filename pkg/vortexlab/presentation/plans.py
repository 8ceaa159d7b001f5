"""Turn a validated experiment config into domain objects."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from vortexlab.application.dtos import ExperimentPlan, PercolationPlan
from vortexlab.core.config import LabSettings
from vortexlab.domain.groups import FiniteGroup, HiggsGroup, UnitaryRep, make_group, quotient_by_scalar_kernel
from vortexlab.domain.hamiltonians import make_model
from vortexlab.domain.lattice import Lattice, Loop, build_lattice, rectangular_loop
from vortexlab.exceptions import ConfigurationError, ValidationError
from vortexlab.infrastructure.group_loader import load_group_file
from vortexlab.services.samplers import Schedule

from .schemas import ExperimentConfig, GroupSpec, LoopSpec, ScheduleSpec


def _group(spec: GroupSpec, base_dir: Path) -> tuple[FiniteGroup, UnitaryRep]:
    if spec.file is not None:
        path = Path(spec.file)
        group, rep = load_group_file(path if path.is_absolute() else base_dir / path)
    else:
        group, rep = make_group(spec.kind, spec.rep, spec.order)
    if spec.quotient_kernel:
        group, rep = quotient_by_scalar_kernel(group, rep)
    return group, rep


def centered_corner(dims: tuple[int, ...], axes: tuple[int, int], extent: tuple[int, int]) -> list[int]:
    """Corner that puts the rectangle in the middle of the lattice."""
    corner = [side // 2 for side in dims]
    for axis, length in zip(axes, extent):
        corner[axis] = (dims[axis] - length) // 2
    return corner


def _loop(spec: LoopSpec, lat: Lattice) -> Loop:
    axes = (int(spec.axes[0]), int(spec.axes[1]))
    extent = (int(spec.extent[0]), int(spec.extent[1]))
    corner = spec.corner if spec.corner is not None else centered_corner(lat.dims, axes, extent)
    if len(corner) != lat.d:
        raise ConfigurationError(f"loop corner needs {lat.d} coordinates, got {len(corner)}")
    return rectangular_loop(lat, corner, axes, extent)


def _schedule(spec: ScheduleSpec, settings: LabSettings) -> Schedule:
    try:
        return Schedule(
            measurements=spec.measurements,
            burn_in=settings.DEFAULT_BURN_IN if spec.burn_in is None else spec.burn_in,
            thinning=settings.DEFAULT_THINNING if spec.thinning is None else spec.thinning,
            chains=spec.chains,
            rule=spec.update,
            batches=settings.MIN_BATCHES if spec.batches is None else spec.batches,
        )
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None


def build_plan(
    config: ExperimentConfig,
    *,
    settings: LabSettings,
    seed: int | None = None,
    base_dir: Path | None = None,
) -> ExperimentPlan:
    """Resolve ``config`` into lattice, model, loop and schedule; ``seed`` overrides the config's."""
    base_dir = base_dir or Path.cwd()
    try:
        lat = build_lattice(config.lattice.dims)
        group, rep = _group(config.group, base_dir)
        higgs = HiggsGroup(order=config.higgs.order)
        model = config.model
        params = make_model(
            model.kind,
            group,
            rep,
            higgs,
            model.beta,
            model.kappa,
            energies=model.energies,
            f_table=None if model.f_table is None else np.asarray(model.f_table, dtype=np.float64),
            quotient=config.higgs.quotient,
            offset_c=model.offset_c,
        )
        loop = _loop(config.loop, lat) if config.loop is not None else None
    except (ValidationError, ValueError) as exc:
        raise ConfigurationError(str(exc)) from None

    predict = config.predict
    percolation = None
    if config.percolation is not None:
        percolation = PercolationPlan(
            kappas=tuple(config.percolation.kappas),
            distances=tuple(config.percolation.distances),
            samples=config.percolation.samples,
        )
    return ExperimentPlan(
        name=config.name,
        lattice=lat,
        params=params,
        loop=loop,
        seed=config.seed if seed is None else seed,
        schedule=_schedule(config.schedule, settings),
        distance=predict.distance,
        weight_dimension=predict.dimension,
        kappa_corrected=predict.kappa_corrected,
        magnetization=predict.magnetization,
        magnetization_samples=predict.magnetization_samples,
        decay_rate=predict.decay_rate,
        min_probability=predict.min_probability,
        vortex_count_max=predict.vortex_count_max,
        support=config.analysis.support,
        validate=config.analysis.validate_samples,
        percolation=percolation,
        max_states=settings.ENUMERATION_MAX_STATES,
        chunk_size=settings.ENUMERATION_CHUNK_SIZE,
        tv_min_samples=settings.TV_MIN_SAMPLES,
        bootstrap_resamples=settings.BOOTSTRAP_RESAMPLES,
        current_tolerance=settings.CURRENT_TAIL_TOLERANCE,
        separation_max_growth=settings.SEPARATION_MAX_GROWTH,
        vortex_enumeration_max_pairs=settings.VORTEX_ENUMERATION_MAX_PAIRS,
    )
