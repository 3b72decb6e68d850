"""Five selectors: ANOVA, RFE, forest importance, lasso, PCA."""

import numpy as np
import pytest

from oracles import brute_anova_f, lasso_orthonormal_solution

from deepfeat.datasets import FeatureMatrix, LabeledDataset
from deepfeat.selection import (
    LassoConvergenceError,
    SelectionError,
    SelectorKind,
    SelectorResult,
    _coordinate_descent,
    anova_select,
    apply_selection,
    lasso_select,
    pca_reduce,
    rf_importance_select,
    rfe_select,
    selector_from_dict,
    selector_from_json,
    selector_to_dict,
    selector_to_json,
)


def _dataset(x, y, names=None):
    y = np.asarray(y, dtype=np.int64)
    if names is None:
        names = tuple(f"c{i}" for i in range(int(y.max()) + 1))
    return LabeledDataset(FeatureMatrix(np.asarray(x, dtype=np.float64)), y, names)


def _signal_dataset(rng, n=60, d=10, informative=2, c=2, sep=3.0):
    labels = rng.integers(0, c, size=n)
    labels[:c] = np.arange(c)
    x = rng.normal(size=(n, d))
    centers = rng.uniform(-sep, sep, size=(c, informative))
    x[:, :informative] = centers[labels] + rng.normal(0, 0.1, size=(n, informative))
    return _dataset(x, labels)


class TestAnova:
    def test_hand_example(self):
        # groups {1, 2} and {3, 4}: F = (4 / 1) / (1 / 2) = 8
        ds = _dataset([[1.0], [2.0], [3.0], [4.0]], [0, 0, 1, 1])
        result = anova_select(ds, k=1)
        assert result.scores[0] == pytest.approx(8.0, rel=1e-9)

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            n = int(rng.integers(6, 40))
            d = int(rng.integers(1, 15))
            c = int(rng.integers(2, 5))
            y = rng.integers(0, c, size=n)
            y[:c] = np.arange(c)
            x = rng.normal(size=(n, d))
            ds = _dataset(x, y)
            got = anova_select(ds, k=d).scores
            ref = brute_anova_f(x, y)
            assert np.allclose(got, ref, rtol=1e-9, atol=1e-12)

    def test_constant_feature_scores_zero(self):
        x = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 4.0], [1.0, 5.0]])
        ds = _dataset(x, [0, 0, 1, 1])
        result = anova_select(ds, k=2)
        assert result.scores[0] == 0.0
        assert result.selected[0] == 1

    def test_selects_top_k_in_rank_order(self, rng):
        ds = _signal_dataset(rng)
        result = anova_select(ds, k=3)
        assert len(result.selected) == 3
        assert set(result.selected[:2]) == {0, 1}
        ranked = sorted(range(10), key=lambda j: -result.scores[j])
        assert list(result.selected) == sorted(ranked[:3],
                                               key=lambda j: -result.scores[j])

    def test_tie_breaks_to_lower_index(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        ds = _dataset(x, [0, 0, 1, 1])
        result = anova_select(ds, k=2)
        assert result.selected == (0, 1)

    def test_k_out_of_range(self, tiny_dataset):
        with pytest.raises(SelectionError):
            anova_select(tiny_dataset, k=0)
        with pytest.raises(SelectionError):
            anova_select(tiny_dataset, k=3)


class TestRfe:
    def test_keeps_informative_features(self, rng):
        ds = _signal_dataset(rng)
        result = rfe_select(ds, k=2, step_fraction=0.3)
        assert set(result.selected) == {0, 1}

    def test_exact_k_survivors(self, rng):
        ds = _signal_dataset(rng, d=10)
        for k in (1, 3, 7, 10):
            assert len(rfe_select(ds, k=k, step_fraction=0.5).selected) == k

    def test_scores_are_elimination_rounds(self, rng):
        ds = _signal_dataset(rng, d=10)
        result = rfe_select(ds, k=3, step_fraction=0.5)
        # round 1 drops 5, round 2 drops 2, survivors score 3
        assert sorted(np.unique(result.scores)) == [1.0, 2.0, 3.0]
        assert all(result.scores[i] == 3.0 for i in result.selected)
        assert int((result.scores == 3.0).sum()) == 3

    def test_step_fraction_validated(self, rng):
        ds = _signal_dataset(rng)
        with pytest.raises(SelectionError):
            rfe_select(ds, k=2, step_fraction=0.0)
        with pytest.raises(SelectionError):
            rfe_select(ds, k=2, step_fraction=1.0)


class TestRfImportance:
    def test_keeps_signal_feature(self, rng):
        ds = _signal_dataset(rng, d=6)
        result = rf_importance_select(ds, seed=0, n_trees=20)
        assert 0 in result.selected or 1 in result.selected
        assert result.params["threshold"] == pytest.approx(1 / 6)

    def test_selected_meet_threshold(self, rng):
        ds = _signal_dataset(rng, d=8)
        result = rf_importance_select(ds, seed=1, n_trees=10)
        mean = result.scores.mean()
        for i in range(8):
            if result.scores[i] >= mean - 1e-12:
                assert i in result.selected
            else:
                assert i not in result.selected

    def test_constant_matrix_keeps_everything(self):
        # no split is possible, importances fall back to uniform and
        # everything sits exactly on the threshold
        ds = _dataset(np.ones((6, 4)), [0, 0, 0, 1, 1, 1])
        result = rf_importance_select(ds, seed=0, n_trees=3)
        assert set(result.selected) == {0, 1, 2, 3}

    def test_seed_changes_forest(self, rng):
        ds = _signal_dataset(rng, d=8)
        a = rf_importance_select(ds, seed=0, n_trees=5)
        b = rf_importance_select(ds, seed=0, n_trees=5)
        assert np.array_equal(a.scores, b.scores)


class TestLasso:
    def test_orthonormal_design_closed_form(self, rng):
        for _ in range(10):
            n, d = 16, int(rng.integers(2, 11))
            q, _ = np.linalg.qr(rng.normal(size=(n, d)))
            x = np.sqrt(n) * q[:, :d]
            y = rng.normal(size=n)
            alpha = float(rng.uniform(0.05, 0.5))
            beta = _coordinate_descent(x, y, alpha, tol=1e-10, max_sweeps=10000)
            ref = lasso_orthonormal_solution(x, y, alpha)
            assert np.max(np.abs(beta - ref)) <= 1e-6

    def test_kkt_conditions_random_designs(self, rng):
        for _ in range(10):
            n, d = 40, 8
            x = rng.normal(size=(n, d))
            y = rng.normal(size=n)
            alpha = 0.1
            beta = _coordinate_descent(x, y, alpha, tol=1e-9, max_sweeps=10000)
            grad = x.T @ (y - x @ beta) / n
            for j in range(d):
                if beta[j] == 0.0:
                    assert abs(grad[j]) <= alpha + 1e-5
                else:
                    assert abs(grad[j] - alpha * np.sign(beta[j])) <= 1e-5

    def test_large_alpha_zeros_everything(self, rng):
        ds = _signal_dataset(rng)
        result = lasso_select(ds, alpha=1e6)
        assert result.selected == ()
        with pytest.raises(SelectionError, match="retained no features"):
            apply_selection(ds.matrix, result)

    def test_selects_signal_features(self, rng):
        ds = _signal_dataset(rng, n=80)
        result = lasso_select(ds, alpha=0.05)
        assert 0 in result.selected
        assert 1 in result.selected

    def test_target_count_bisection(self, rng):
        ds = _signal_dataset(rng, n=80, d=12, informative=4)
        result = lasso_select(ds, target_count=4)
        assert len(result.selected) == 4
        assert result.params["target_count"] == 4
        assert result.params["alpha"] > 0

    def test_alpha_validated(self, rng):
        ds = _signal_dataset(rng)
        with pytest.raises(SelectionError):
            lasso_select(ds, alpha=0.0)
        with pytest.raises(SelectionError):
            lasso_select(ds, target_count=0)

    def test_sweep_cap_raises(self, rng):
        x = rng.normal(size=(20, 5))
        y = rng.normal(size=20)
        with pytest.raises(LassoConvergenceError):
            _coordinate_descent(x, y, alpha=0.01, tol=1e-12, max_sweeps=1)


class TestPca:
    def test_projection_orthonormal(self, rng):
        x = FeatureMatrix(rng.normal(size=(30, 8)))
        result = pca_reduce(x, k=5)
        gram = result.projection @ result.projection.T
        assert np.max(np.abs(gram - np.eye(5))) <= 1e-9

    def test_full_rank_reconstruction(self, rng):
        x = rng.normal(size=(20, 6))
        m = FeatureMatrix(x)
        result = pca_reduce(m, k=6)
        z = apply_selection(m, result)
        back = z.values @ result.projection + result.center
        assert np.max(np.abs(back - x)) <= 1e-8

    def test_variances_non_increasing(self, rng):
        x = FeatureMatrix(rng.normal(size=(40, 10)) * rng.uniform(0.1, 5.0, size=10))
        result = pca_reduce(x, k=8)
        assert np.all(np.diff(result.scores) <= 1e-12)

    def test_first_component_follows_elongation(self, rng):
        t = rng.normal(size=200)
        x = np.column_stack([t, t]) + rng.normal(0, 0.01, size=(200, 2))
        result = pca_reduce(FeatureMatrix(x), k=1)
        direction = result.projection[0]
        assert abs(abs(direction @ np.array([1, 1]) / np.sqrt(2)) - 1) <= 1e-3

    def test_sign_convention(self, rng):
        x = FeatureMatrix(rng.normal(size=(25, 6)))
        result = pca_reduce(x, k=4)
        for row in result.projection:
            assert row[np.argmax(np.abs(row))] > 0

    def test_k_bounded_by_rank(self, rng):
        x = FeatureMatrix(rng.normal(size=(4, 10)))
        with pytest.raises(SelectionError):
            pca_reduce(x, k=4)  # min(n - 1, d) = 3
        assert pca_reduce(x, k=3).n_features_out == 3

    def test_component_variances_match_projected_data(self, rng):
        x = rng.normal(size=(50, 5))
        m = FeatureMatrix(x)
        result = pca_reduce(m, k=3)
        z = apply_selection(m, result).values
        assert np.allclose(z.var(axis=0, ddof=1), result.scores, rtol=1e-10)


class TestApplySelection:
    def test_gathers_columns_in_rank_order(self, rng):
        ds = _signal_dataset(rng)
        result = anova_select(ds, k=3)
        out = apply_selection(ds.matrix, result)
        assert out.n_features == 3
        assert np.array_equal(out.values,
                              ds.matrix.values[:, list(result.selected)])
        assert out.feature_ids == tuple(ds.matrix.feature_ids[i]
                                        for i in result.selected)

    def test_pca_feature_ids(self, rng):
        m = FeatureMatrix(rng.normal(size=(10, 4)))
        out = apply_selection(m, pca_reduce(m, k=2))
        assert out.feature_ids == ("pc0", "pc1")

    def test_dimension_mismatch(self, rng):
        ds = _signal_dataset(rng)
        result = anova_select(ds, k=2)
        with pytest.raises(SelectionError):
            apply_selection(FeatureMatrix(rng.normal(size=(3, 4))), result)


class TestSelectorSerde:
    def test_index_selector_round_trip(self, rng):
        ds = _signal_dataset(rng)
        result = anova_select(ds, k=4)
        back = selector_from_json(selector_to_json(result))
        assert back.kind == SelectorKind.ANOVA
        assert back.selected == result.selected
        assert np.array_equal(back.scores, result.scores)
        assert back.params == result.params

    def test_pca_round_trip_bit_exact(self, rng):
        m = FeatureMatrix(rng.normal(size=(12, 6)))
        result = pca_reduce(m, k=3)
        back = selector_from_dict(selector_to_dict(result))
        assert np.array_equal(back.projection, result.projection)
        assert np.array_equal(back.center, result.center)
        probe = rng.normal(size=(4, 6))
        assert np.array_equal(apply_selection(FeatureMatrix(probe), back).values,
                              apply_selection(FeatureMatrix(probe), result).values)

    def test_unknown_version_rejected(self, rng):
        ds = _signal_dataset(rng)
        doc = selector_to_dict(anova_select(ds, k=2))
        doc["format_version"] = 99
        with pytest.raises(SelectionError):
            selector_from_dict(doc)

    def test_result_invariants(self):
        with pytest.raises(SelectionError):
            SelectorResult(kind=SelectorKind.ANOVA, selected=(0, 0),
                           scores=np.ones(3))
        with pytest.raises(SelectionError):
            SelectorResult(kind=SelectorKind.PCA, selected=(),
                           scores=np.ones(2),
                           projection=np.array([[1.0, 1.0], [0.0, 1.0]]),
                           center=np.zeros(2))
