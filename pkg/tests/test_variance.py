import math

import numpy as np
import pytest

from vensemble import (
    EstimatorError,
    Method,
    Mode,
    SeedSpec,
    SubsamplePlan,
    bm_estimate,
    confidence_interval,
    corrected_ij,
    corrected_u,
    corrected_v,
    corrected_v_simplified,
    draw_balanced,
    draw_im_plan,
    estimate,
    ij_estimate,
    im_estimate,
    inclusion_counts,
    total_variance,
)
from vensemble.variance import corrected_v_exact_form, normal_quantile, zeta_kk_hat


def _plan(subs, n, mode=Mode.WITH_REPLACEMENT):
    plan = SubsamplePlan(np.array(subs), mode, n)
    return plan, inclusion_counts(plan)


def _im_plan(groups_h):
    """An IM plan over n=10 with k=2 whose group g uses fixed point g."""
    n_out, n_in = len(groups_h), len(groups_h[0])
    groups = np.repeat(np.arange(n_out), n_in)
    subs = np.column_stack([groups, np.full(groups.size, 9)])
    plan = SubsamplePlan(subs, Mode.IM_TWO_LEVEL, 10, groups=groups, fixed_points=np.arange(n_out))
    return plan, np.array(groups_h, dtype=float).ravel()


def test_zeta_kk():
    assert zeta_kk_hat([7, 7, 7]) == 0.0
    assert zeta_kk_hat([0, 2]) == 2.0
    assert zeta_kk_hat([1, 2, 3, 4]) == pytest.approx(5 / 3)
    with pytest.raises(EstimatorError):
        zeta_kk_hat([1.0])


def test_im_hand_examples():
    plan, h = _im_plan([[1, 1], [3, 3]])
    rep = im_estimate(h, plan)
    assert rep.zeta1_hat == pytest.approx(2.0)
    assert rep.zetakk_hat == pytest.approx(4 / 3)
    plan, h = _im_plan([[0, 2], [0, 2]])
    rep = im_estimate(h, plan)
    assert rep.zeta1_hat == 0.0
    assert rep.zetakk_hat == pytest.approx(4 / 3)
    plan, h = _im_plan([[5, 5], [5, 5]])
    rep = im_estimate(h, plan)
    assert (rep.zeta1_hat, rep.zetakk_hat) == (0.0, 0.0)


def test_im_rejects_other_modes():
    plan, inc = _plan([[0], [1]], 2)
    with pytest.raises(EstimatorError):
        im_estimate([0.0, 2.0], plan)


def test_im_from_drawn_plan():
    plan = draw_im_plan(20, 4, 3, 4, "with_replacement", SeedSpec(1, "im"))
    h = np.arange(12.0)
    rep = estimate("IM", h, plan, inclusion_counts(plan))
    assert rep.method is Method.IM
    assert rep.zeta1_hat == pytest.approx(np.var([1.5, 5.5, 9.5], ddof=1))


def test_bm_hand_examples():
    _, inc = _plan([[0], [1]], 2)
    rep = bm_estimate([0.0, 2.0], inc)
    assert rep.zeta1_hat == pytest.approx(2.0)
    _, inc = _plan([[0, 0], [0, 1]], 2)
    assert bm_estimate([0.0, 3.0], inc).zeta1_hat == pytest.approx(2.0)
    _, inc = _plan([[0], [1]], 2)
    assert bm_estimate([4.0, 4.0], inc).zeta1_hat == 0.0


def test_bm_skips_unsampled_points():
    _, inc = _plan([[0], [1]], 5)
    assert bm_estimate([0.0, 2.0], inc).zeta1_hat == pytest.approx(2.0)
    _, inc = _plan([[0], [0]], 3)
    with pytest.raises(EstimatorError):
        bm_estimate([0.0, 2.0], inc)


def test_ij_hand_example_and_balanced_identity():
    _, inc = _plan([[0], [1]], 2)
    v = ij_estimate([0.0, 2.0], inc)
    assert v == pytest.approx(0.5)
    bm = bm_estimate([0.0, 2.0], inc).zeta1_hat
    assert 1 / 2 * bm == pytest.approx(2 / 1 * v)
    assert ij_estimate([3.0, 3.0], inc) == 0.0


def test_corrected_v_constant_predictions():
    plan = draw_balanced(10, 4, 10, "balanced_v", SeedSpec(1, "cv"))
    rep = corrected_v(np.full(10, 2.5), inclusion_counts(plan))
    assert (rep.ss_tau, rep.ss_eps, rep.zeta1_hat) == (0.0, 0.0, 0.0)


def test_corrected_v_requires_replication():
    plan = draw_balanced(10, 2, 5, "balanced_v", SeedSpec(1, "r1"))
    with pytest.raises(EstimatorError):
        corrected_v(np.arange(5.0), inclusion_counts(plan))


def test_corrected_v_balanced_identity(rng):
    for trial in range(20):
        plan = draw_balanced(30, 6, 25, "balanced_v", SeedSpec(trial, "bal"))
        inc = inclusion_counts(plan)
        h = rng.normal(size=25)
        rep = corrected_v(h, inc)
        m = inc.counts @ h / inc.row_sums
        r = plan.r
        s2 = rep.ss_eps / (25 * 6 - 30)
        short = np.var(m, ddof=1) - s2 / r
        assert rep.zeta1_hat == pytest.approx(short, rel=1e-10, abs=1e-14)
        assert corrected_v_exact_form(h, inc) == pytest.approx(rep.zeta1_hat, rel=1e-10, abs=1e-14)
        assert rep.ss_tau >= 0 and rep.ss_eps >= 0


def test_corrected_v_unbalanced_grand_mean(rng):
    plan, inc = _plan(rng.integers(0, 8, size=(30, 4)), 8)
    h = rng.normal(size=30)
    rep = corrected_v(h, inc)
    N = inc.row_sums.astype(float)
    keep = N > 0
    m = inc.counts[keep] @ h / N[keep]
    grand = N[keep] @ m / 120
    assert rep.ss_tau == pytest.approx(float(N[keep] @ (m - grand) ** 2))


def test_simplified_close_at_large_r(rng):
    n, k, B = 50, 10, 500
    plan = draw_balanced(n, k, B, "balanced_v", SeedSpec(3, "r100"))
    assert plan.r == 100
    inc = inclusion_counts(plan)
    # a kernel with real signal so zeta_1 is not swamped by noise
    y = rng.normal(size=n)
    h = np.array([y[s].mean() for s in plan.subsamples]) + 0.1 * rng.normal(size=B)
    exact = corrected_v(h, inc).zeta1_hat
    simple = corrected_v_simplified(h, inc)
    assert abs(simple - exact) / abs(exact) < 0.02
    assert corrected_v_simplified(np.ones(B), inc) == 0.0


def test_corrected_v_simplified_needs_balance(rng):
    _, inc = _plan(rng.integers(0, 8, size=(30, 4)), 8)
    with pytest.raises(EstimatorError):
        corrected_v_simplified(rng.normal(size=30), inc)


def test_corrected_u_factor_and_errors():
    plan = draw_balanced(10, 9, 10, "balanced_u", SeedSpec(4, "u"))
    inc = inclusion_counts(plan)
    h = np.linspace(0, 1, 10)
    m = inc.counts @ h / inc.row_sums
    inner = np.var(m, ddof=1) - (10 - 9) / (9 * 10) * np.var(h, ddof=1)
    assert corrected_u(h, inc) == pytest.approx(90 * inner)
    assert corrected_u(np.zeros(10), inc) == 0.0
    full = draw_balanced(10, 10, 4, "balanced_u", SeedSpec(4, "u2"))
    with pytest.raises(EstimatorError):
        corrected_u(np.arange(4.0), inclusion_counts(full))


def test_corrected_ij():
    assert corrected_ij(0.0, 10, 3) == 0.0
    assert corrected_ij(1.0, 500, 100) == pytest.approx(1.5594, abs=1e-4)
    assert corrected_ij(2.0, 4, 2) == pytest.approx(6.0)
    with pytest.raises(EstimatorError):
        corrected_ij(1.0, 4, 4)


def test_total_variance():
    assert total_variance(0, 0, 10, 2, 3) == 0
    assert total_variance(0.01, 2, 500, 100, 1000) == pytest.approx(0.202)
    n, k, B = 100, 4, 200
    assert total_variance(1 / k**2, 1 / k, n, k, B) == pytest.approx(1 / n + 1 / (k * B))


def test_confidence_interval():
    iv = confidence_interval(0.0, 1.0, 0.95)
    assert iv.half_width == pytest.approx(1.96, abs=1e-3)
    iv = confidence_interval(3.0, 0.0)
    assert (iv.lower, iv.upper) == (3.0, 3.0)
    iv = confidence_interval(3.0, -0.5)
    assert iv.clamped and iv.half_width == 0.0 and iv.variance_used == 0.0
    with pytest.raises(EstimatorError):
        confidence_interval(0.0, 1.0, 1.5)


def test_normal_quantile_accuracy():
    from statistics import NormalDist

    for q in (0.5, 0.9, 0.975, 0.995, 1e-6):
        assert NormalDist().cdf(normal_quantile(q)) == pytest.approx(q, rel=1e-9)
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)


@pytest.mark.parametrize("method", list(Method))
def test_dispatch_reports_method(method):
    if method is Method.IM:
        plan = draw_im_plan(20, 4, 3, 4, "with_replacement", SeedSpec(5, "im"))
    else:
        plan = draw_balanced(20, 4, 25, "balanced_u", SeedSpec(5, "bu"))
    h = np.random.default_rng(0).normal(size=plan.B)
    rep = estimate(method, h, plan, inclusion_counts(plan))
    assert rep.method is method
    assert rep.total_variance == pytest.approx(total_variance(rep.zeta1_hat, rep.zetakk_hat, 20, 4, plan.B))


def test_ij_report_adds_monte_carlo_term():
    plan = draw_balanced(20, 4, 25, "balanced_v", SeedSpec(6, "bv"))
    inc = inclusion_counts(plan)
    h = np.random.default_rng(1).normal(size=25)
    rep = estimate("IJ", h, plan, inc)
    assert rep.total_variance == pytest.approx(ij_estimate(h, inc) + np.var(h, ddof=1) / 25)
    assert math.isclose(rep.zeta1_hat * 16 / 20, ij_estimate(h, inc))
