from .dtos import ExperimentPlan, MagnetizationSource, PercolationPlan, RunOutput, Table
from .use_cases import (
    PublishReport,
    RunComparison,
    RunExactOracle,
    RunPercolation,
    RunPredictor,
    RunSampler,
)

__all__ = [
    "ExperimentPlan",
    "MagnetizationSource",
    "PercolationPlan",
    "PublishReport",
    "RunComparison",
    "RunExactOracle",
    "RunOutput",
    "RunPercolation",
    "RunPredictor",
    "RunSampler",
    "Table",
]
