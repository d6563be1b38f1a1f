import numpy as np
import pytest

from vensemble import (
    Dataset,
    KernelSpec,
    Mode,
    SeedSpec,
    SubsamplePlan,
    draw_plan,
    evaluate_point,
    fit_ensemble,
    fit_kernel,
    load_ensemble,
    save_ensemble,
)
from vensemble.ensemble import LearnerError
from vensemble.harness import gen_mars, mars_function

MEAN = KernelSpec("subsample_mean")
REG = KernelSpec("regression_tree")


def test_single_learner_matches_kernel(seed):
    d = gen_mars(40, SeedSpec(1, "d"))
    plan = draw_plan("with_replacement", 40, 20, 1, seed)
    fit = fit_ensemble(d, REG, plan, seed)
    alone = fit_kernel(d, plan.subsamples[0], REG, seed.child("learner:0"))
    np.testing.assert_array_equal(fit.predict(d.features), alone.predict(d.features))


def test_balanced_mean_kernel_gives_sample_mean(seed):
    d = gen_mars(30, SeedSpec(2, "d"))
    plan = draw_plan("balanced_v", 30, 6, 15, seed)
    fit = fit_ensemble(d, MEAN, plan, seed)
    assert fit.predict(d.features[:1])[0] == pytest.approx(d.targets.mean(), rel=1e-12)


def test_two_point_hand_example(seed):
    d = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 2.0]))
    plan = SubsamplePlan(np.array([[0], [1]]), Mode.WITH_REPLACEMENT, 2)
    ev = evaluate_point(fit_ensemble(d, MEAN, plan, seed), np.array([0.5]))
    assert ev.h_values.tolist() == [0.0, 2.0]
    assert ev.mean == 1.0


def test_mean_kernel_linearity(seed):
    d = gen_mars(25, SeedSpec(3, "d"))
    plan = draw_plan("with_replacement", 25, 7, 40, seed)
    fit = fit_ensemble(d, MEAN, plan, seed)
    expected = fit.inclusion.row_sums @ d.targets / (40 * 7)
    assert fit.predict(d.features[:1])[0] == pytest.approx(expected, rel=1e-12)


def test_evaluate_point_dimension_mismatch(seed):
    d = gen_mars(20, SeedSpec(4, "d"))
    fit = fit_ensemble(d, REG, draw_plan("with_replacement", 20, 5, 3, seed), seed)
    with pytest.raises(ValueError):
        evaluate_point(fit, np.array([0.5, 0.5]))


def test_mars_ensemble_near_regression_function():
    d = gen_mars(500, SeedSpec(5, "d"))
    p1 = np.full(5, 0.5)
    assert mars_function(p1[None, :])[0] == pytest.approx(18.6211, abs=1e-4)
    plan = draw_plan("with_replacement", 500, 100, 1000, SeedSpec(5, "plan"))
    fit = fit_ensemble(d, REG, plan, SeedSpec(5, "fit"), focus=p1[None, :])
    assert abs(evaluate_point(fit, p1).mean - 18.6211) < 3.0


def test_parallel_equals_serial():
    d = gen_mars(60, SeedSpec(6, "d"))
    plan = draw_plan("without_replacement", 60, 20, 16, SeedSpec(6, "plan"))
    a = fit_ensemble(d, REG, plan, SeedSpec(6, "fit"), workers=1)
    b = fit_ensemble(d, REG, plan, SeedSpec(6, "fit"), workers=2)
    assert [m.to_json() for m in a.learners] == [m.to_json() for m in b.learners]


def test_learner_errors_carry_index(seed):
    d = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
    plan = SubsamplePlan(np.array([[0], [1]]), Mode.WITH_REPLACEMENT, 2)
    with pytest.raises(LearnerError, match="learner 0"):
        fit_ensemble(d, KernelSpec("classification_tree"), plan, seed)


def test_plan_size_mismatch(seed):
    d = gen_mars(10, SeedSpec(7, "d"))
    with pytest.raises(ValueError):
        fit_ensemble(d, REG, draw_plan("with_replacement", 12, 3, 2, seed), seed)


def test_save_and_load(tmp_path, seed):
    d = gen_mars(50, SeedSpec(8, "d"))
    plan = draw_plan("balanced_u", 50, 10, 10, seed)
    fit = fit_ensemble(d, REG, plan, seed)
    save_ensemble(fit, tmp_path / "m.json")
    back = load_ensemble(tmp_path / "m.json")
    assert back.plan.mode is Mode.BALANCED_U
    np.testing.assert_array_equal(back.h_matrix(d.features), fit.h_matrix(d.features))
    np.testing.assert_array_equal(back.inclusion.counts, fit.inclusion.counts)


def test_load_rejects_foreign_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_ensemble(p)
