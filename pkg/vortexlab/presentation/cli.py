from __future__ import annotations

import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Callable

import click
from pydantic import ValidationError as SchemaError

from vortexlab import __version__
from vortexlab.application.dtos import ExperimentPlan, RunOutput
from vortexlab.bootstrap import LabBootstrapConfig, build_lab_module
from vortexlab.core.config import settings
from vortexlab.core.logging_setup import configure_logging, run_log
from vortexlab.exceptions import ConfigurationError, DomainError, MissingSeedError
from vortexlab.infrastructure.reports import canonical_json, to_jsonable

from .plans import build_plan
from .schemas import ExperimentConfig, ExperimentReport

logger = logging.getLogger(__name__)


def load_config(path: Path) -> ExperimentConfig:
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from None
    return ExperimentConfig.model_validate(payload)


def build_report(config: ExperimentConfig, plan: ExperimentPlan, output: RunOutput) -> ExperimentReport:
    echo = config.model_dump(mode="json")
    echo["seed"] = plan.seed
    decided = [value for value in output.checks.values() if value is not None]
    return ExperimentReport(
        subcommand=output.subcommand,
        version=f"vortexlab {__version__}",
        config=echo,
        config_sha256=hashlib.sha256(canonical_json(echo).encode("utf-8")).hexdigest(),
        seed=plan.seed,
        observables=to_jsonable(output.observables),
        predictions=to_jsonable(output.predictions),
        budgets=to_jsonable(output.budgets) if output.budgets is not None else None,
        checks=dict(sorted(output.checks.items())),
        passed=all(decided),
        series=sorted(f"{table.name}.csv" for table in output.tables),
        notes=list(output.notes),
    )


def _fail(message: str, code: int) -> None:
    click.echo(f"[!] {message}", err=True)
    sys.exit(code)


def run_subcommand(subcommand: str, config_path: Path, seed: int | None, out: Path | None, threads: int) -> Path:
    """Load, run, report; returns the output directory."""
    try:
        config = load_config(config_path)
        plan = build_plan(config, settings=settings, seed=seed, base_dir=config_path.parent)
        if plan.seed is None:
            raise MissingSeedError("no seed in the config; pass --seed")
        module = build_lab_module(config=LabBootstrapConfig(threads=threads))
        directory = out or Path(config.outputs.directory or settings.OUTPUT_ROOT) / config.name / subcommand
        with run_log(directory):
            logger.info("[%s] %s: seed %d, %d thread(s)", subcommand, plan.name, plan.seed, threads)
            started = time.perf_counter()
            try:
                output = module.run(subcommand, plan)
            except DomainError as exc:
                logger.error("[!] %s failed: %s", subcommand, exc)
                raise
            elapsed = time.perf_counter() - started
            report = build_report(config, plan, output)
            module.publish.execute(directory, report.model_dump(), output, {"wall_clock_seconds": elapsed})
    except SchemaError as exc:
        _fail(f"invalid experiment config {config_path}:\n{exc}", ConfigurationError.exit_code)
    except DomainError as exc:
        _fail(str(exc), exc.exit_code)

    failing = sorted(name for name, value in report.checks.items() if value is False)
    if failing:
        click.echo(f"[{subcommand}] failing checks: {', '.join(failing)}", err=True)
    click.echo(f"[{subcommand}] report written to {directory}")
    return directory


def _run_options(fn: Callable) -> Callable:
    fn = click.option(
        "--threads",
        type=click.IntRange(min=1),
        envvar="VORTEXLAB_THREADS",
        default=settings.THREADS,
        show_default=True,
        help="Worker threads for chains and enumeration chunks.",
    )(fn)
    fn = click.option(
        "--out",
        type=click.Path(file_okay=False, path_type=Path),
        default=None,
        help="Output directory (default: OUTPUT_ROOT/<name>/<subcommand>).",
    )(fn)
    fn = click.option("--seed", type=click.IntRange(min=0), default=None, help="Overrides the config seed.")(fn)
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        required=True,
        help="Experiment config (JSON).",
    )(fn)
    return fn


@click.group()
@click.version_option(__version__, prog_name="vortexlab")
@click.option("--log-level", default=None, help="Overrides LOG_LEVEL.")
def main(log_level: str | None) -> None:
    """Lattice gauge-Higgs experiments: exact enumeration, sampling and predictions."""
    configure_logging(log_level)


@main.command()
@_run_options
def exact(config_path: Path, seed: int | None, out: Path | None, threads: int) -> None:
    """Enumerate every state of a tiny lattice."""
    run_subcommand("exact", config_path, seed, out, threads)


@main.command()
@_run_options
def sample(config_path: Path, seed: int | None, out: Path | None, threads: int) -> None:
    """Run Markov chains and measure Wilson loops and vortex counts."""
    run_subcommand("sample", config_path, seed, out, threads)


@main.command()
@_run_options
def predict(config_path: Path, seed: int | None, out: Path | None, threads: int) -> None:
    """Evaluate leading-order predictions and error budgets."""
    run_subcommand("predict", config_path, seed, out, threads)


@main.command()
@_run_options
def compare(config_path: Path, seed: int | None, out: Path | None, threads: int) -> None:
    """Sample, predict and check the measured gap against the budget."""
    run_subcommand("compare", config_path, seed, out, threads)


@main.command()
@_run_options
def perc(config_path: Path, seed: int | None, out: Path | None, threads: int) -> None:
    """Connectivity decay of activated currents against bond percolation."""
    run_subcommand("perc", config_path, seed, out, threads)
