"""Balanced accuracy, cross-validation protocol and the approximation study."""
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import balanced_accuracy_score

from fgac.data import Dataset
from fgac.evaluation import EvalConfig, _folds, approx_study, balanced_accuracy, cross_validate, fold_seed
from support import dataset


class TestBalancedAccuracy:
    def test_examples(self):
        assert balanced_accuracy([0, 0, 0, 0, 1], [0, 0, 0, 0, 0]) == 0.5
        assert balanced_accuracy([0, 1, 2], [0, 1, 2]) == 1.0

    @pytest.mark.filterwarnings("ignore::UserWarning")
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60))
    def test_matches_sklearn(self, pairs):
        t, p = map(np.array, zip(*pairs))
        assert balanced_accuracy(t, p) == pytest.approx(balanced_accuracy_score(t, p), abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            balanced_accuracy([0, 1], [0])
        with pytest.raises(ValueError):
            balanced_accuracy([], [])
        with pytest.raises(ValueError):
            balanced_accuracy([0, 0], [0, 1], classes=[0, 1])


def small(name="iris", every=3):
    d = dataset(name)
    idx = np.arange(0, len(d), every)
    return Dataset(d.name, d.attributes, d.frame.iloc[idx].reset_index(drop=True), d.target[idx], d.classes)


class TestConfig:
    @pytest.mark.parametrize("kwargs", [{"family": "svm"}, {"folds": 1}, {"metric": "auc"}, {"grid": ()}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            EvalConfig(**kwargs)

    def test_default_grids(self):
        assert len(EvalConfig().grid) == 11
        assert EvalConfig(family="kfrnn").grid[0] is None

    def test_fold_seed_is_counter_based(self):
        a = fold_seed(7, 1, 2).generate_state(2)
        np.testing.assert_array_equal(a, fold_seed(7, 1, 2).generate_state(2))
        assert not np.array_equal(a, fold_seed(7, 2, 1).generate_state(2))


class TestFolds:
    def test_stratified(self):
        y = np.repeat([0, 1, 2], [30, 20, 10])
        splits, n = _folds(y, 5, 0)
        assert n == 5
        for _, te in splits:
            np.testing.assert_array_equal(np.bincount(y[te]), [6, 4, 2])
        assert sorted(np.concatenate([te for _, te in splits])) == list(range(60))

    def test_reduction_warning(self, caplog):
        y = np.array([0] * 10 + [1] * 3)
        with caplog.at_level(logging.WARNING):
            _, n = _folds(y, 5, 0)
        assert n == 3 and "reducing folds" in caplog.text

    def test_tiny_class(self):
        with pytest.raises(ValueError):
            _folds(np.array([0] * 5 + [1]), 5, 0)


class TestCrossValidate:
    @pytest.mark.parametrize("family,grid", [("fgac", (0.5, 2.0)), ("knn", (1, 5)), ("kfrnn", (None, 3))])
    def test_deterministic(self, family, grid):
        cfg = EvalConfig(family=family, grid=grid, folds=3, seed=4)
        a, b = cross_validate(small(), cfg), cross_validate(small(), cfg)
        np.testing.assert_array_equal(a.scores, b.scores)
        assert a.best == b.best and a.scores.shape == (2, 3)
        assert 0.7 <= a.mean <= 1.0

    def test_best_is_argmax_first_on_ties(self):
        res = cross_validate(small(), EvalConfig(family="knn", grid=(3, 3), folds=3))
        assert res.best == 3
        np.testing.assert_array_equal(res.fold_scores, res.scores[0])

    def test_seed_changes_folds(self):
        a = cross_validate(small(), EvalConfig(family="knn", grid=(1,), folds=3, seed=0))
        b = cross_validate(small(), EvalConfig(family="knn", grid=(1,), folds=3, seed=1))
        assert not np.array_equal(a.fold_scores, b.fold_scores)

    def test_nested(self):
        res = cross_validate(small(), EvalConfig(family="knn", grid=(1, 7), folds=3, nested=True))
        assert res.nested and len(res.chosen) == 3 and len(res.fold_scores) == 3
        assert res.best in (1, 7)
        d = res.to_dict()
        assert d["nested"] and d["candidate_means"] == {}

    def test_without_oversampling(self):
        res = cross_validate(small("haberman", 2), EvalConfig(grid=(1.0,), folds=3, oversample=False))
        assert 0.0 <= res.mean <= 1.0

    def test_owa_variant(self):
        from fgac.classifier import OwaPredictionConfig
        res = cross_validate(small(), EvalConfig(grid=(1.0,), folds=3, owa=OwaPredictionConfig("additive", 5)))
        assert res.mean > 0.7


class TestApproxStudy:
    def test_reference_row_and_monotone_shape(self):
        rows = approx_study(small("haberman", 2), [1.0], [1.0, 0.5, 0.1])
        assert [r.nn for r in rows] == [1.0, 0.5, 0.1]
        assert rows[0].difference == 0.0 and rows[0].time_ratio == 1.0
        assert rows[0].constraints > rows[1].constraints > rows[2].constraints
        assert all(r.difference >= 0 for r in rows)

    def test_objective_grows_with_fewer_constraints_removed(self):
        rows = approx_study(small("haberman", 2), [1.0], [1.0, 0.2], losses=["mae"])
        assert rows[1].objective <= rows[0].objective + 1e-9

    def test_needs_full_nn(self):
        with pytest.raises(ValueError):
            approx_study(small(), [1.0], [0.5])
