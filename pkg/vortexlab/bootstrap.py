from __future__ import annotations

from dataclasses import dataclass

from vortexlab.application.dtos import ExperimentPlan, RunOutput
from vortexlab.application.interfaces import ReportWriter, TaskExecutor
from vortexlab.application.use_cases import (
    PublishReport,
    RunComparison,
    RunExactOracle,
    RunPercolation,
    RunPredictor,
    RunSampler,
)
from vortexlab.exceptions import ConfigurationError
from vortexlab.infrastructure import FileReportWriter, ThreadPoolTaskExecutor

SUBCOMMANDS = ("exact", "sample", "predict", "compare", "perc")


@dataclass(frozen=True, slots=True)
class LabBootstrapConfig:
    threads: int = 1


@dataclass(slots=True)
class LabModule:
    exact: RunExactOracle
    sample: RunSampler
    predict: RunPredictor
    compare: RunComparison
    perc: RunPercolation
    publish: PublishReport

    def run(self, subcommand: str, plan: ExperimentPlan) -> RunOutput:
        if subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"unknown subcommand {subcommand!r}")
        use_case = getattr(self, subcommand)
        return use_case.execute(plan)


def build_lab_module(
    *,
    config: LabBootstrapConfig,
    executor: TaskExecutor | None = None,
    writer: ReportWriter | None = None,
) -> LabModule:
    executor = executor or ThreadPoolTaskExecutor(threads=config.threads)
    sampler = RunSampler(executor=executor)
    predictor = RunPredictor(executor=executor)
    return LabModule(
        exact=RunExactOracle(executor=executor),
        sample=sampler,
        predict=predictor,
        compare=RunComparison(sampler=sampler, predictor=predictor),
        perc=RunPercolation(executor=executor),
        publish=PublishReport(writer=writer or FileReportWriter()),
    )
