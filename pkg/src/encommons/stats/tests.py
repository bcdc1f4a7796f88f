from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True, slots=True)
class ChiSquareResult:
    statistic: float
    pvalue: float
    dof: int
    n: int


def byte_histogram(blobs: Iterable[bytes]) -> np.ndarray:
    counts = np.zeros(256, dtype=np.int64)
    for b in blobs:
        counts += np.bincount(np.frombuffer(b, dtype=np.uint8), minlength=256)
    return counts


def byte_uniformity(blobs: Iterable[bytes]) -> ChiSquareResult:
    """Chi-square goodness of fit of byte values against the uniform distribution."""

    counts = byte_histogram(blobs)
    n = int(counts.sum())
    if n == 0:
        nan = float("nan")
        return ChiSquareResult(nan, nan, 255, 0)
    res = stats.chisquare(counts)
    return ChiSquareResult(float(res.statistic), float(res.pvalue), 255, n)


def binomial_upper_bound(successes: int, trials: int, *, confidence: float = 0.95) -> float:
    """One-sided Clopper-Pearson upper bound on a success probability."""

    if trials <= 0:
        return 1.0
    if successes >= trials:
        return 1.0
    return float(stats.beta.ppf(confidence, successes + 1, trials - successes))
