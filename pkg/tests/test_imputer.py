"""Tests for iterative random-forest imputation."""

import numpy as np
import pytest

from raingap.artifacts import state_digest
from raingap.exceptions import ImputerError, SchemaMismatchError
from raingap.imputer import fit_imputer, impute_rows, visit_order


@pytest.fixture
def correlated():
    rng = np.random.default_rng(21)
    base = rng.normal(size=300)
    X = np.column_stack([base, 2.0 * base + rng.normal(scale=0.05, size=300), rng.normal(size=300)])
    return X


def _mask(X, rate, seed):
    rng = np.random.default_rng(seed)
    masked = X.copy()
    masked[rng.random(X.shape) < rate] = np.nan
    return masked


class TestVisitOrder:
    def test_least_missing_first_then_by_name(self):
        assert visit_order([3, 0, 3, 1], ["d", "c", "a", "b"]) == ("c", "b", "a", "d")


class TestImputeRows:
    def test_present_cells_are_unchanged_and_input_is_not_modified(self, correlated):
        model = fit_imputer(correlated[:200], ["x", "y", "z"], n_estimators=10, seed=1)
        rows = _mask(correlated[200:], 0.2, seed=2)
        before = rows.copy()
        filled = impute_rows(model, rows, ["x", "y", "z"])
        present = ~np.isnan(rows)
        np.testing.assert_array_equal(filled[present], rows[present])
        np.testing.assert_array_equal(np.isnan(rows), np.isnan(before))
        assert np.isfinite(filled).all()

    def test_beats_mean_filling_on_correlated_columns(self, correlated):
        model = fit_imputer(correlated[:200], n_estimators=20, seed=1)
        truth = correlated[200:]
        rows = truth.copy()
        rows[::2, 1] = np.nan
        filled = impute_rows(model, rows)
        missing = np.isnan(rows[:, 1])
        forest_error = np.mean((filled[missing, 1] - truth[missing, 1]) ** 2)
        mean_error = np.mean((model.means[1] - truth[missing, 1]) ** 2)
        assert forest_error < 0.25 * mean_error

    def test_single_gap_rows_get_the_column_forest_prediction(self, correlated):
        model = fit_imputer(correlated[:200], ["x", "y", "z"], n_estimators=8, max_rounds=1, seed=4)
        rows = correlated[200:260].copy()
        gap_column = np.arange(len(rows)) % 3
        rows[np.arange(len(rows)), gap_column] = np.nan
        filled = impute_rows(model, rows, ["x", "y", "z"])
        for j, name in enumerate(model.feature_names):
            hit = gap_column == j
            expected = model.forests[name].predict(rows[hit][:, model.inputs_of(name)])
            np.testing.assert_allclose(filled[hit, j], expected, rtol=1e-12, atol=0)

    def test_complete_rows_pass_through(self, correlated):
        model = fit_imputer(correlated[:100], n_estimators=3, seed=0)
        np.testing.assert_array_equal(impute_rows(model, correlated[100:110]), correlated[100:110])

    def test_schema_is_checked(self, correlated):
        model = fit_imputer(correlated[:100], ["x", "y", "z"], n_estimators=3, seed=0)
        with pytest.raises(SchemaMismatchError):
            impute_rows(model, correlated[:5, :2])
        with pytest.raises(SchemaMismatchError):
            impute_rows(model, correlated[:5], ["x", "z", "y"])


class TestFitImputer:
    def test_needs_two_columns(self):
        with pytest.raises(ImputerError):
            fit_imputer(np.ones((10, 1)))

    def test_column_without_training_value(self):
        X = np.ones((10, 2))
        X[:, 1] = np.nan
        with pytest.raises(ImputerError):
            fit_imputer(X)

    def test_missing_training_cells_are_tolerated(self, correlated):
        model = fit_imputer(_mask(correlated[:150], 0.1, seed=3), n_estimators=3, seed=0)
        assert np.isfinite(model.means).all()

    def test_seeded(self, correlated):
        a = fit_imputer(correlated[:100], n_estimators=4, seed=7)
        b = fit_imputer(correlated[:100], n_estimators=4, seed=7)
        c = fit_imputer(correlated[:100], n_estimators=4, seed=8)
        assert state_digest(a) == state_digest(b)
        assert state_digest(a) != state_digest(c)

    def test_visit_order_can_come_from_the_full_training_set(self, correlated):
        model = fit_imputer(correlated[:100], ["x", "y", "z"], n_estimators=2, missing_counts=[5, 1, 1])
        assert model.order == ("y", "z", "x")
