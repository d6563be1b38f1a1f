"""Synthetic regression designs used in the simulation studies."""

from __future__ import annotations

import numpy as np

from ..data_model import Dataset
from ..rng import SeedSpec

MARS_X3_CENTER = 0.05


def linear_function(X: np.ndarray) -> np.ndarray:
    return 2.0 * np.asarray(X)[:, 0]


def gen_linear(n: int, seed: SeedSpec) -> Dataset:
    """X ~ 20 * U(0, 1), Y = 2X + N(0, 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed.generator()
    X = 20.0 * rng.random((n, 1))
    y = linear_function(X) + rng.standard_normal(n)
    return Dataset(X, y, feature_names=("x1",))


def mars_function(X: np.ndarray, x3_center: float = MARS_X3_CENTER) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    return (
        10 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20 * (X[:, 2] - x3_center) ** 2
        + 10 * X[:, 3]
        + 5 * X[:, 4]
    )


def gen_mars(n: int, seed: SeedSpec, x3_center: float = MARS_X3_CENTER) -> Dataset:
    """Five uniform features, MARS-style response plus standard normal noise.

    ``x3_center`` defaults to 0.05; Friedman's original benchmark uses 0.5.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed.generator()
    X = rng.random((n, 5))
    y = mars_function(X, x3_center) + rng.standard_normal(n)
    return Dataset(X, y, feature_names=tuple(f"x{j + 1}" for j in range(5)))


def resample_rows(population: Dataset, n: int, seed: SeedSpec) -> Dataset:
    """An i.i.d. draw of ``n`` rows from a fixed table treated as the population."""
    rows = seed.generator().integers(0, population.n, size=n)
    return population.subset(rows)
