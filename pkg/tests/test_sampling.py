import itertools
import math

import numpy as np
import pytest

from vensemble import Mode, PlanError, SeedSpec, draw_balanced, draw_im_plan, draw_plan, inclusion_counts
from vensemble.sampling import draw_with_replacement, draw_without_replacement


def test_with_replacement_single_index(seed):
    plan = draw_with_replacement(1, 3, 2, seed)
    assert plan.subsamples.tolist() == [[0, 0, 0], [0, 0, 0]]


def test_with_replacement_mass_conservation(seed):
    inc = inclusion_counts(draw_with_replacement(500, 100, 1000, seed))
    assert inc.row_sums.mean() == 200.0
    assert np.all(inc.col_sums == 100)


def test_with_replacement_duplicate_rate():
    plan = draw_with_replacement(5, 2, 10**5, SeedSpec(11, "dup"))
    frac = np.mean(plan.subsamples[:, 0] == plan.subsamples[:, 1])
    se = math.sqrt(0.2 * 0.8 / 10**5)
    assert abs(frac - 0.2) < 3 * se


def test_without_replacement_full_permutations(seed):
    plan = draw_without_replacement(3, 3, 2, seed)
    for row in plan.subsamples:
        assert sorted(row.tolist()) == [0, 1, 2]


def test_without_replacement_uniform_over_subsets():
    B = 6 * 10**4
    plan = draw_without_replacement(4, 2, B, SeedSpec(5, "subsets"))
    keys = [tuple(sorted(r)) for r in plan.subsamples.tolist()]
    se = math.sqrt((1 / 6) * (5 / 6) / B)
    for s in itertools.combinations(range(4), 2):
        assert abs(keys.count(s) / B - 1 / 6) < 3 * se


def test_without_replacement_rejects_k_above_n(seed):
    with pytest.raises(PlanError):
        draw_without_replacement(2, 3, 1, seed)


@pytest.mark.parametrize("bad", [dict(n=0, k=1, B=1), dict(n=1, k=0, B=1), dict(n=1, k=1, B=0)])
def test_rejects_zero_sizes(bad, seed):
    with pytest.raises(PlanError):
        draw_with_replacement(seed=seed, **bad)


def test_balanced_trivial(seed):
    plan = draw_balanced(2, 1, 2, "balanced_v", seed)
    assert sorted(plan.subsamples.ravel().tolist()) == [0, 1]
    assert plan.r == 1


def test_balanced_v_row_sums(seed):
    plan = draw_balanced(4, 2, 4, "balanced_v", seed)
    assert inclusion_counts(plan).row_sums.tolist() == [2, 2, 2, 2]


def test_balanced_rejects_non_divisible(seed):
    with pytest.raises(PlanError):
        draw_balanced(3, 2, 4, "balanced_v", seed)


@pytest.mark.parametrize("n,k,B", [(50, 10, 25), (20, 19, 40), (30, 15, 6), (7, 7, 3)])
def test_balanced_u_distinct_and_balanced(n, k, B):
    plan = draw_balanced(n, k, B, "balanced_u", SeedSpec(3, f"bu:{n}:{k}:{B}"))
    inc = inclusion_counts(plan)
    assert inc.counts.max() == 1
    assert np.all(inc.row_sums == B * k // n)


def test_im_plan_contains_fixed_points(seed):
    plan = draw_im_plan(10, 3, 2, 2, "with_replacement", seed)
    assert plan.B == 4
    for b in range(plan.B):
        assert plan.fixed_points[plan.groups[b]] in plan.subsamples[b]
    assert len(set(plan.fixed_points.tolist())) == 2


def test_im_plan_single_point(seed):
    plan = draw_im_plan(1, 2, 1, 3, "with_replacement", seed)
    assert plan.subsamples.tolist() == [[0, 0]] * 3


def test_im_plan_k_equals_n(seed):
    plan = draw_im_plan(5, 5, 2, 2, "without_replacement", seed)
    for row in plan.subsamples:
        assert sorted(row.tolist()) == [0, 1, 2, 3, 4]


def test_im_plan_rejects_too_many_groups(seed):
    with pytest.raises(PlanError):
        draw_im_plan(3, 2, 4, 2, "with_replacement", seed)


@pytest.mark.parametrize("mode", ["with_replacement", "without_replacement", "balanced_v", "balanced_u"])
def test_plans_reproducible(mode):
    a = draw_plan(mode, 20, 5, 8, SeedSpec(9, "plan"))
    b = draw_plan(mode, 20, 5, 8, SeedSpec(9, "plan"))
    c = draw_plan(mode, 20, 5, 8, SeedSpec(9, "other"))
    np.testing.assert_array_equal(a.subsamples, b.subsamples)
    assert not np.array_equal(a.subsamples, c.subsamples)


@pytest.mark.parametrize("mode", ["with_replacement", "without_replacement", "balanced_v", "balanced_u"])
def test_marginal_inclusion_probability(mode):
    n, k, B = 10, 3, 4000
    plan = draw_plan(mode, n, k, B, SeedSpec(21, mode))
    p_hat = (inclusion_counts(plan).counts > 0).mean(axis=1)
    if mode in ("without_replacement", "balanced_u"):
        target = k / n
    else:
        target = 1 - (1 - 1 / n) ** k
    se = math.sqrt(target * (1 - target) / B)
    # balanced plans are exact for the multiset, so the i.i.d. bound is conservative
    assert np.all(np.abs(p_hat - target) < 4 * se)
