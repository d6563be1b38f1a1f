"""Subsample plans: with/without replacement, balanced, and two-level IM."""

from __future__ import annotations

import numpy as np

from .data_model import Mode, SubsamplePlan
from .rng import SeedSpec

BALANCED_U_RESHUFFLES = 100


class PlanError(ValueError):
    pass


def _check_positive(**kwargs: int) -> None:
    for name, value in kwargs.items():
        if int(value) < 1:
            raise PlanError(f"{name} must be >= 1, got {value}")


def draw_with_replacement(n: int, k: int, B: int, seed: SeedSpec) -> SubsamplePlan:
    _check_positive(n=n, k=k, B=B)
    rng = seed.generator()
    subs = rng.integers(0, n, size=(B, k))
    return SubsamplePlan(subs, Mode.WITH_REPLACEMENT, n, seed.master_seed)


def draw_without_replacement(n: int, k: int, B: int, seed: SeedSpec) -> SubsamplePlan:
    _check_positive(n=n, k=k, B=B)
    if k > n:
        raise PlanError(f"cannot draw k={k} distinct indices from n={n}")
    rng = seed.generator()
    # random sort keys per row give a uniform k-subset in uniform order
    keys = rng.random((B, n))
    subs = np.argsort(keys, axis=1, kind="stable")[:, :k]
    return SubsamplePlan(subs, Mode.WITHOUT_REPLACEMENT, n, seed.master_seed)


def draw_balanced(n: int, k: int, B: int, mode: Mode | str, seed: SeedSpec) -> SubsamplePlan:
    """Every index appears exactly ``r = B*k/n`` times across the plan.

    ``balanced_v`` shuffles the multiset and chunks it, so a block may repeat
    an index.  ``balanced_u`` additionally repairs blocks with repeats by
    swapping entries across blocks; after ``BALANCED_U_RESHUFFLES`` failed
    attempts it gives up.
    """
    _check_positive(n=n, k=k, B=B)
    mode = Mode(mode)
    if mode not in (Mode.BALANCED_V, Mode.BALANCED_U):
        raise PlanError(f"not a balanced mode: {mode.value}")
    if (B * k) % n:
        raise PlanError(f"B*k = {B * k} is not a multiple of n = {n}")
    r = B * k // n
    if mode is Mode.BALANCED_U and (k > n or r > B):
        raise PlanError("no balanced without-replacement plan exists for these sizes")
    rng = seed.generator()
    pool = np.repeat(np.arange(n), r)
    if mode is Mode.BALANCED_V:
        return SubsamplePlan(rng.permutation(pool).reshape(B, k), mode, n, seed.master_seed)
    for _ in range(BALANCED_U_RESHUFFLES):
        blocks = rng.permutation(pool).reshape(B, k)
        if _repair_duplicates(blocks, n, rng):
            return SubsamplePlan(blocks, mode, n, seed.master_seed)
    raise PlanError(
        f"balanced_u repair failed after {BALANCED_U_RESHUFFLES} reshuffles"
    )


def _repair_duplicates(blocks: np.ndarray, n: int, rng: np.random.Generator) -> bool:
    """Swap entries between blocks until no block repeats an index (in place)."""
    B, k = blocks.shape
    counts = np.zeros((B, n), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(B), k), blocks.ravel()), 1)
    for b in range(B):
        while True:
            dup_vals = np.flatnonzero(counts[b] > 1)
            if dup_vals.size == 0:
                break
            v = dup_vals[0]
            pos = int(np.flatnonzero(blocks[b] == v)[0])
            # partner block c lacks v; partner slot holds some w absent from b
            partners = np.flatnonzero(counts[:, v] == 0)
            fixed = False
            for c in rng.permutation(partners):
                options = np.flatnonzero(counts[b, blocks[c]] == 0)
                if options.size == 0:
                    continue
                q = int(options[rng.integers(options.size)])
                w = blocks[c, q]
                blocks[b, pos], blocks[c, q] = w, v
                counts[b, v] -= 1
                counts[b, w] += 1
                counts[c, w] -= 1
                counts[c, v] += 1
                fixed = True
                break
            if not fixed:
                return False
    return True


def draw_im_plan(
    n: int,
    k: int,
    n_out: int,
    n_in: int,
    mode: Mode | str,
    seed: SeedSpec,
) -> SubsamplePlan:
    """Two-level plan: ``n_out`` fixed points, each shared by ``n_in`` subsamples.

    The fixed point takes one of the ``k`` slots (slot 0); the other ``k - 1``
    are drawn according to ``mode`` from the training set.
    """
    _check_positive(n=n, k=k)
    mode = Mode(mode)
    if mode not in (Mode.WITH_REPLACEMENT, Mode.WITHOUT_REPLACEMENT):
        raise PlanError("IM subsamples are drawn with or without replacement")
    if n_out < 1 or n_in < 1:
        raise PlanError("n_out and n_in must be positive")
    if n_out > n:
        raise PlanError(f"n_out={n_out} exceeds n={n}")
    if mode is Mode.WITHOUT_REPLACEMENT and k > n:
        raise PlanError(f"k={k} exceeds n={n}")
    rng = seed.generator()
    fixed = rng.choice(n, size=n_out, replace=False)
    B = n_out * n_in
    subs = np.empty((B, k), dtype=np.int64)
    groups = np.repeat(np.arange(n_out), n_in)
    subs[:, 0] = fixed[groups]
    if k > 1:
        if mode is Mode.WITH_REPLACEMENT:
            subs[:, 1:] = rng.integers(0, n, size=(B, k - 1))
        else:
            keys = rng.random((B, n))
            keys[np.arange(B), subs[:, 0]] = np.inf
            subs[:, 1:] = np.argsort(keys, axis=1, kind="stable")[:, : k - 1]
    return SubsamplePlan(subs, Mode.IM_TWO_LEVEL, n, seed.master_seed, groups, fixed)


def draw_plan(mode: Mode | str, n: int, k: int, B: int, seed: SeedSpec) -> SubsamplePlan:
    """Dispatch for the single-level modes."""
    mode = Mode(mode)
    if mode is Mode.WITH_REPLACEMENT:
        return draw_with_replacement(n, k, B, seed)
    if mode is Mode.WITHOUT_REPLACEMENT:
        return draw_without_replacement(n, k, B, seed)
    if mode in (Mode.BALANCED_V, Mode.BALANCED_U):
        return draw_balanced(n, k, B, mode, seed)
    raise PlanError("use draw_im_plan for two-level plans")
