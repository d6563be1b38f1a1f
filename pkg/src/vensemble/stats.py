"""Normality testing and the calibration metrics used in coverage studies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .variance import IntervalEstimate

MIN_NORMALITY_SAMPLES = 20


@dataclass(frozen=True)
class NormalityResult:
    statistic: float
    p_value: float
    n_samples: int
    skew_z: float
    kurtosis_z: float


def _skew_z(x: np.ndarray) -> float:
    n = x.size
    d = x - x.mean()
    m2 = np.mean(d**2)
    b1 = np.mean(d**3) / m2**1.5
    y = b1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = 3.0 * (n * n + 27 * n - 70) * (n + 1) * (n + 3) / ((n - 2.0) * (n + 5) * (n + 7) * (n + 9))
    w2 = -1 + math.sqrt(2 * (beta2 - 1))
    delta = 1 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1))
    if y == 0:
        y = 1.0
    return delta * math.log(y / alpha + math.sqrt((y / alpha) ** 2 + 1))


def _kurtosis_z(x: np.ndarray) -> float:
    n = x.size
    d = x - x.mean()
    m2 = np.mean(d**2)
    b2 = np.mean(d**4) / m2**2
    mean_b2 = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1) ** 2 * (n + 3) * (n + 5))
    xs = (b2 - mean_b2) / math.sqrt(var_b2)
    sqrt_beta1 = (
        6.0 * (n * n - 5 * n + 2) / ((n + 7) * (n + 9))
        * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2) * (n - 3)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + math.sqrt(1 + 4.0 / sqrt_beta1**2))
    term1 = 1 - 2 / (9.0 * a)
    denom = 1 + xs * math.sqrt(2 / (a - 4.0))
    if denom == 0:
        return math.inf if xs > 0 else -math.inf
    term2 = math.copysign(((1 - 2.0 / a) / abs(denom)) ** (1 / 3.0), denom)
    return (term1 - term2) / math.sqrt(2 / (9.0 * a))


def normality_test(samples: Iterable[float]) -> NormalityResult:
    """D'Agostino-Pearson omnibus test: squared normalised skewness plus kurtosis.

    The chi-square(2) survival function is exactly ``exp(-K2 / 2)``.
    """
    x = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=np.float64).ravel()
    if x.size < MIN_NORMALITY_SAMPLES:
        raise ValueError(f"normality test needs at least {MIN_NORMALITY_SAMPLES} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    if np.ptp(x) <= 1e-12 * max(1.0, float(np.abs(x).max())):
        raise ValueError("samples have zero variance")
    zs, zk = _skew_z(x), _kurtosis_z(x)
    k2 = zs * zs + zk * zk
    return NormalityResult(k2, math.exp(-k2 / 2), int(x.size), zs, zk)


def coverage(intervals: Sequence[IntervalEstimate], reference: float) -> float:
    if not intervals:
        raise ValueError("no intervals")
    hits = sum(iv.contains(reference) for iv in intervals)
    return 100.0 * hits / len(intervals)


def empirical_variance(samples) -> float:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError("need at least two samples")
    return float(np.var(x, ddof=1))


def variance_ratio(estimates, empirical_variance: float) -> float:
    if not empirical_variance > 0:
        raise ValueError("empirical variance must be positive")
    return float(np.mean(np.asarray(estimates, dtype=np.float64)) / empirical_variance)
