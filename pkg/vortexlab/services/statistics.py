from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from vortexlab.exceptions import ValidationError

MIN_BATCHES = 16


@dataclass(frozen=True, slots=True)
class BatchEstimate:
    mean: complex | float
    stderr: float
    batches: int

    @property
    def real(self) -> float:
        return float(np.real(self.mean))


def block_averages(series: np.ndarray, block_length: int) -> np.ndarray:
    """Means of consecutive blocks; leading samples that do not fill a block are dropped."""
    if block_length == 1:
        return np.asarray(series)
    series = np.asarray(series)
    usable = series.size - series.size % block_length
    return series[series.size - usable:].reshape(-1, block_length).mean(axis=1)


def batch_means(series: np.ndarray, batches: int = MIN_BATCHES) -> BatchEstimate:
    """Mean with a batch-means standard error from ``batches`` equal blocks.

    Complex series get the error of the modulus of the deviation.
    """
    if batches < MIN_BATCHES:
        raise ValidationError(f"batch means need at least {MIN_BATCHES} batches, got {batches}")
    series = np.asarray(series)
    if series.size < batches:
        raise ValidationError(f"series of {series.size} samples cannot fill {batches} batches")
    block = block_averages(series, series.size // batches)
    spread = np.abs(block - block.mean())
    stderr = float(np.sqrt((spread**2).sum() / (block.size - 1) / block.size))
    mean = series.mean()
    if np.iscomplexobj(mean):
        return BatchEstimate(mean=complex(mean), stderr=stderr, batches=int(block.size))
    return BatchEstimate(mean=float(mean), stderr=stderr, batches=int(block.size))


def binomial_error(probability: float, samples: int) -> float:
    if samples <= 0:
        return float("nan")
    return float(np.sqrt(max(probability * (1.0 - probability), 0.0) / samples))


def bootstrap_std(
    values: np.ndarray,
    statistic: Callable[[np.ndarray], float],
    rng: np.random.Generator,
    resamples: int,
) -> float:
    values = np.asarray(values)
    if values.size == 0 or resamples < 2:
        return 0.0
    draws = rng.integers(0, values.size, size=(resamples, values.size))
    replicates = np.array([statistic(values[row]) for row in draws])
    return float(replicates.std(ddof=1))
