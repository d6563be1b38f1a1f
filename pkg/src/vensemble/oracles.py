"""Exact enumeration and Monte Carlo ground truth on small instances.

A kernel here is any callable taking a sequence of data points (one per
argument slot) and returning a float.  It is assumed permutation symmetric.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

MAX_TERMS = 10**7
MAX_STIRLING_K = 20

Kernel = Callable[[Sequence], float]


class BudgetError(ValueError):
    pass


class StatisticKind(str, enum.Enum):
    COMPLETE_U = "complete_U"
    COMPLETE_V = "complete_V"
    LEMMA1_SUM = "lemma1_sum"
    COMPOSITE_U = "composite_U"


@dataclass(frozen=True)
class ExactStatistic:
    value: float
    terms_evaluated: int
    kind: StatisticKind


def _budget(terms: int) -> None:
    if terms > MAX_TERMS:
        raise BudgetError(f"{terms} kernel evaluations exceed the budget of {MAX_TERMS}")


@lru_cache(maxsize=None)
def stirling2(k: int, j: int) -> int:
    """Stirling number of the second kind: partitions of k items into j blocks."""
    if not (0 <= j <= k <= MAX_STIRLING_K):
        raise ValueError(f"need 0 <= j <= k <= {MAX_STIRLING_K}, got k={k}, j={j}")
    if k == 0:
        return 1
    if j == 0:
        return 0
    prev_same = stirling2(k - 1, j) if j <= k - 1 else 0
    return j * prev_same + stirling2(k - 1, j - 1)


def complete_v_bruteforce(data: Sequence, kernel: Kernel, k: int) -> ExactStatistic:
    n = len(data)
    _budget(n**k)
    total = math.fsum(kernel([data[i] for i in b]) for b in itertools.product(range(n), repeat=k))
    return ExactStatistic(total / n**k, n**k, StatisticKind.COMPLETE_V)


def complete_u_bruteforce(data: Sequence, kernel: Kernel, k: int) -> ExactStatistic:
    n = len(data)
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    terms = math.comb(n, k)
    _budget(terms)
    total = math.fsum(kernel([data[i] for i in s]) for s in itertools.combinations(range(n), k))
    return ExactStatistic(total / terms, terms, StatisticKind.COMPLETE_U)


def _surjections(j: int, k: int):
    """k-tuples over range(j) that use every one of the j values."""
    for t in itertools.product(range(j), repeat=k):
        if len(set(t)) == j:
            yield t


def lemma1_decomposition(data: Sequence, kernel: Kernel, k: int) -> ExactStatistic:
    """V = n^-k * sum_j j! S(k, j) C(n, j) U^(j).

    ``U^(j)`` is the complete U-statistic of degree j whose kernel averages
    ``h`` over the k-tuples built from its j arguments using each at least once.
    """
    n = len(data)
    _budget(n**k)
    parts = []
    terms = 0
    for j in range(1, min(k, n) + 1):
        weight = math.factorial(j) * stirling2(k, j)
        maps = list(_surjections(j, k))
        assert len(maps) == weight
        subset_vals = []
        for s in itertools.combinations(range(n), j):
            phi = math.fsum(kernel([data[s[t]] for t in tup]) for tup in maps) / weight
            subset_vals.append(phi)
            terms += weight
        u_j = math.fsum(subset_vals) / math.comb(n, j)
        parts.append(weight * math.comb(n, j) * u_j)
    return ExactStatistic(math.fsum(parts) / n**k, terms, StatisticKind.LEMMA1_SUM)


def composite_weight(b: Sequence[int], n: int, k: int) -> tuple[int, float]:
    """``(u, 1 / C(n - u, k - u))`` where u counts the distinct entries of b."""
    if len(b) != k:
        raise ValueError(f"tuple must have length k={k}")
    if any(i < 0 or i >= n for i in b):
        raise ValueError(f"indices must lie in [0, {n})")
    u = len(set(b))
    return u, 1.0 / math.comb(n - u, k - u)


def composite_weight_sum_check(n: int, k: int, subset: Sequence[int] | None = None) -> float:
    """Sum of the weights over all k^k tuples drawn from one size-k subset.

    Equals ``n^k / C(n, k)`` for every subset.
    """
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    _budget(k**k)
    s = tuple(range(k)) if subset is None else tuple(subset)
    if len(set(s)) != k:
        raise ValueError("subset must hold k distinct indices")
    return math.fsum(composite_weight(b, n, k)[1] for b in itertools.product(s, repeat=k))


def composite_kernel(data: Sequence, kernel: Kernel, subset: Sequence[int]) -> float:
    """phi*(Z_s) = C(n,k)/n^k * sum_{b in s^k} w_b h(Z_b)."""
    n, k = len(data), len(subset)
    total = math.fsum(
        composite_weight(b, n, k)[1] * kernel([data[i] for i in b])
        for b in itertools.product(subset, repeat=k)
    )
    return math.comb(n, k) / n**k * total


def composite_u_statistic(data: Sequence, kernel: Kernel, k: int) -> ExactStatistic:
    """The complete V-statistic rewritten as a U-statistic with kernel phi*."""
    n = len(data)
    if k > n:
        raise ValueError(f"k={k} exceeds n={n}")
    terms = math.comb(n, k) * k**k
    _budget(terms)
    vals = [composite_kernel(data, kernel, s) for s in itertools.combinations(range(n), k)]
    return ExactStatistic(math.fsum(vals) / math.comb(n, k), terms, StatisticKind.COMPOSITE_U)


Sampler = Callable[[np.random.Generator, int], np.ndarray]


def mc_zeta(
    kernel: Kernel,
    sampler: Sampler,
    k: int,
    c: int,
    reps: int,
    rng: np.random.Generator,
    inner: int = 50,
) -> tuple[float, float]:
    """Monte Carlo estimate and standard error of zeta_1 (``c=1``) or zeta_kk (``c=k``).

    ``zeta_1`` is estimated as the variance of the conditional mean given the
    first argument: ``reps`` outer draws, ``inner`` fresh completions each,
    with the within-group noise ``s^2 / inner`` subtracted.
    """
    if reps < 100:
        raise ValueError("reps must be >= 100")
    if c == k:
        h = np.array([kernel(list(sampler(rng, k))) for _ in range(reps)])
        d = (h - h.mean()) ** 2 * reps / (reps - 1)
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(reps))
    if c != 1:
        raise ValueError("c must be 1 or k")
    if inner < 2:
        raise ValueError("inner must be >= 2")
    means = np.empty(reps)
    within = np.empty(reps)
    for r in range(reps):
        z1 = sampler(rng, 1)[0]
        vals = np.array([kernel([z1, *sampler(rng, k - 1)]) for _ in range(inner)])
        means[r] = vals.mean()
        within[r] = vals.var(ddof=1)
    d = (means - means.mean()) ** 2 * reps / (reps - 1) - within / inner
    return float(d.mean()), float(d.std(ddof=1) / math.sqrt(reps))


def analytic_mean_kernel_zetas(sigma2: float, k: int) -> tuple[float, float]:
    """(zeta_1, zeta_kk) for the kernel that averages its k arguments."""
    if sigma2 <= 0 or k < 1:
        raise ValueError("need sigma2 > 0 and k >= 1")
    return sigma2 / k**2, sigma2 / k
