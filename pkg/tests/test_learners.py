import json

import numpy as np
import pytest

from vensemble import Dataset, KernelSpec, SeedSpec, Task, TreeParams, fit_kernel, predict_kernel
from vensemble.harness import gen_mars
from vensemble.learners import default_mtry, kernel_from_json

REG = KernelSpec("regression_tree")


def _data(X, y, task=Task.REGRESSION):
    return Dataset(np.asarray(X, dtype=float), np.asarray(y, dtype=float), task)


def test_subsample_mean_is_constant(seed):
    d = _data([[0.0], [1.0]], [1.0, 3.0])
    m = fit_kernel(d, [0, 1], KernelSpec("subsample_mean"), seed)
    assert predict_kernel(m, np.array([5.0])) == 2.0
    assert predict_kernel(m, np.array([-5.0])) == 2.0


def test_subsample_mean_counts_duplicates(seed):
    d = _data([[0.0], [1.0]], [1.0, 4.0])
    m = fit_kernel(d, [0, 0, 1], KernelSpec("subsample_mean"), seed)
    assert predict_kernel(m, np.array([0.0])) == pytest.approx(2.0)


def test_subsample_mean_takes_no_tree_params():
    with pytest.raises(ValueError):
        KernelSpec("subsample_mean", TreeParams())


def test_single_point_tree_is_a_leaf(seed):
    d = _data([[0.0], [1.0]], [7.0, 3.0])
    m = fit_kernel(d, [0], REG, seed)
    assert m.n_nodes == 1
    for x in (-1.0, 0.0, 10.0):
        assert predict_kernel(m, np.array([x])) == 7.0


def test_two_point_tree_splits_between(seed):
    d = _data([[0.0], [1.0]], [0.0, 1.0])
    m = fit_kernel(d, [0, 1], KernelSpec("regression_tree", TreeParams(mtry=1)), seed)
    assert m.n_nodes == 3
    assert 0.0 < m.threshold[0] <= 1.0
    assert predict_kernel(m, np.array([0.0])) == 0.0
    assert predict_kernel(m, np.array([1.0])) == 1.0


def test_empty_indices_rejected(seed):
    with pytest.raises(ValueError):
        fit_kernel(_data([[0.0]], [1.0]), [], REG, seed)


def test_dimension_mismatch(seed):
    d = _data([[0.0, 1.0], [1.0, 0.0]], [0.0, 1.0])
    m = fit_kernel(d, [0, 1], REG, seed)
    with pytest.raises(ValueError):
        predict_kernel(m, np.array([1.0]))


def test_mtry_defaults():
    assert default_mtry(5, Task.REGRESSION) == 1
    assert default_mtry(2, Task.REGRESSION) == 1
    assert default_mtry(9, Task.REGRESSION) == 3
    assert default_mtry(5, Task.CLASSIFICATION) == 3
    assert default_mtry(4, Task.CLASSIFICATION) == 2


def test_mtry_above_p_rejected():
    with pytest.raises(ValueError):
        KernelSpec("regression_tree", TreeParams(mtry=4)).resolve_mtry(3)


def test_min_samples_split_and_depth(seed):
    d = gen_mars(100, SeedSpec(1, "d"))
    stump = fit_kernel(d, np.arange(100), KernelSpec("regression_tree", TreeParams(max_depth=1)), seed)
    assert stump.depth == 1
    big = fit_kernel(d, np.arange(100), KernelSpec("regression_tree", TreeParams(min_samples_split=100)), seed)
    assert big.depth == 1
    none = fit_kernel(d, np.arange(100), KernelSpec("regression_tree", TreeParams(min_samples_split=101)), seed)
    assert none.n_nodes == 1


def test_full_tree_interpolates_distinct_points(seed):
    d = gen_mars(60, SeedSpec(1, "d"))
    m = fit_kernel(d, np.arange(60), REG, seed)
    np.testing.assert_allclose(m.predict(d.features), d.targets)


def test_permutation_symmetry():
    d = gen_mars(80, SeedSpec(2, "d"))
    idx = SeedSpec(2, "idx").generator().integers(0, 80, 40)
    perm = idx[::-1].copy()
    s = SeedSpec(2, "learner")
    a = fit_kernel(d, idx, REG, s)
    b = fit_kernel(d, perm, REG, s)
    assert a.to_json() == b.to_json()


def test_reproducible_and_seed_dependent():
    d = gen_mars(80, SeedSpec(3, "d"))
    idx = np.arange(80)
    a = fit_kernel(d, idx, REG, SeedSpec(3, "l:0"))
    b = fit_kernel(d, idx, REG, SeedSpec(3, "l:0"))
    c = fit_kernel(d, idx, REG, SeedSpec(3, "l:1"))
    assert a.to_json() == b.to_json()
    assert a.to_json() != c.to_json()


def test_focus_matches_full_tree():
    d = gen_mars(150, SeedSpec(4, "d"))
    pts = SeedSpec(4, "pts").generator().random((5, 5))
    idx = SeedSpec(4, "idx").generator().integers(0, 150, 60)
    for b in range(10):
        s = SeedSpec(4, f"learner:{b}")
        full = fit_kernel(d, idx, REG, s)
        part = fit_kernel(d, idx, REG, s, focus=pts)
        assert part.n_nodes <= full.n_nodes
        np.testing.assert_array_equal(full.predict(pts), part.predict(pts))


def test_partial_tree_refuses_unseen_region():
    d = gen_mars(100, SeedSpec(5, "d"))
    focus = np.full((1, 5), 0.5)
    m = fit_kernel(d, np.arange(100), REG, SeedSpec(5, "l"), focus=focus)
    f, t = m.feature[0], m.threshold[0]
    other = focus.copy()
    # send the query down the root branch that was never grown
    other[0, f] = t + 1.0 if focus[0, f] <= t else t - 1.0
    with pytest.raises(ValueError, match="partial"):
        m.predict(other)


def test_classification_probabilities(seed):
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    d = _data(X, [0, 0, 1, 1], Task.CLASSIFICATION)
    m = fit_kernel(d, [0, 1, 2, 3], KernelSpec("classification_tree"), seed)
    assert predict_kernel(m, np.array([0.0])) == 0.0
    assert predict_kernel(m, np.array([3.0])) == 1.0
    np.testing.assert_allclose(m.predict_proba(X).sum(axis=1), 1.0)


def test_classification_needs_classification_data(seed):
    with pytest.raises(ValueError):
        fit_kernel(_data([[0.0], [1.0]], [0, 1]), [0, 1], KernelSpec("classification_tree"), seed)


def test_json_roundtrip():
    d = gen_mars(50, SeedSpec(6, "d"))
    m = fit_kernel(d, np.arange(50), REG, SeedSpec(6, "l"))
    back = kernel_from_json(json.loads(json.dumps(m.to_json())))
    np.testing.assert_array_equal(back.predict(d.features), m.predict(d.features))


def test_constant_features_give_leaf(seed):
    d = _data(np.ones((4, 2)), [1.0, 2.0, 3.0, 4.0])
    m = fit_kernel(d, np.arange(4), REG, seed)
    assert m.n_nodes == 1
    assert predict_kernel(m, np.array([1.0, 1.0])) == 2.5
