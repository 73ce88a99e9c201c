"""Tests for the five learner families and the common fit/predict interface."""

import numpy as np
import pytest

from raingap.exceptions import ConfigError, DataError, DegenerateModelError, SchemaMismatchError
from raingap.learners import LearnerSpec, fit, predict, validate_params
from raingap.learners.boosting import fit_boosting
from raingap.learners.forest import fit_forest
from raingap.learners.knn import fit_knn, resolve_algorithm
from raingap.learners.network import fit_network, init_params, loss_and_gradients
from raingap.learners.svm import fit_svm, kernel_matrix

from conftest import TINY_GRIDS, TINY_OPTIONS


@pytest.fixture
def separable():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(80, 3))
    y = (X[:, 0] + X[:, 1] > 1.0).astype(float)
    return X, y


@pytest.fixture
def smooth():
    rng = np.random.default_rng(6)
    X = rng.uniform(size=(80, 3))
    y = 2.0 * X[:, 0] + X[:, 2] ** 2
    return X, y


class TestInterface:
    def test_unknown_and_missing_parameters(self):
        with pytest.raises(ConfigError):
            validate_params("boosting", "classify", {"max_depth": 8})
        with pytest.raises(ConfigError):
            validate_params("lasso", "classify", {})
        with pytest.raises(ConfigError):
            validate_params("network", "cluster", {"hidden_layers": 2})

    def test_off_grid_value(self):
        with pytest.raises(ConfigError):
            validate_params("network", "regress", {"hidden_layers": 3}, grid={"hidden_layers": [2, 8, 20]})

    def test_network_label_carries_depth(self):
        assert LearnerSpec("network", "regress", {"hidden_layers": 8}).label == "network(8)"
        knn_params = {"n_neighbours": 5, "leaf_size": 3, "algorithm": "kd-tree"}
        assert LearnerSpec("knn", "regress", knn_params).label == "knn"

    def test_single_class_training_set(self, separable):
        X, _ = separable
        spec = LearnerSpec("knn", "classify", {"n_neighbours": 5, "leaf_size": 1, "algorithm": "auto"})
        with pytest.raises(DegenerateModelError):
            fit(spec, X, np.zeros(len(X)))

    def test_incomplete_training_rows(self, separable):
        X, y = separable
        X = X.copy()
        X[0, 0] = np.nan
        spec = LearnerSpec("knn", "classify", {"n_neighbours": 5, "leaf_size": 1, "algorithm": "auto"})
        with pytest.raises(DataError):
            fit(spec, X, y)

    def test_column_count_is_checked(self, separable):
        X, y = separable
        spec = LearnerSpec("knn", "classify", {"n_neighbours": 5, "leaf_size": 1, "algorithm": "auto"})
        model = fit(spec, X, y)
        with pytest.raises(SchemaMismatchError):
            predict(model, X[:, :2])

    @pytest.mark.parametrize("family", ["boosting", "forest", "knn", "svm", "network"])
    def test_every_family_serves_both_tasks(self, family, separable, smooth):
        params = {name: values[0] for name, values in TINY_GRIDS[family].items()}
        X, y = separable
        labels = predict(fit(LearnerSpec(family, "classify", params, seed=1), X, y, TINY_OPTIONS[family]), X)
        assert labels.shape == (len(X),)
        assert set(np.unique(labels).tolist()) <= {0, 1}
        X, y = smooth
        amounts = predict(fit(LearnerSpec(family, "regress", params, seed=1), X, y, TINY_OPTIONS[family]), X)
        assert amounts.shape == (len(X),)
        assert np.isfinite(amounts).all()


class TestBoosting:
    @pytest.mark.parametrize("task", ["classify", "regress"])
    def test_training_loss_never_increases(self, task, separable, smooth):
        X, y = separable if task == "classify" else smooth
        model = fit_boosting(X, y, task, max_depth=3, n_rounds=20, subsample=0.6, seed=2)
        losses = np.array(model.train_loss)
        assert len(losses) == 21
        assert np.all(np.diff(losses) <= 1e-12)
        assert losses[-1] < losses[0]

    def test_single_full_step_interpolates(self, smooth):
        X, y = smooth
        model = fit_boosting(X, y, "regress", max_depth=None, learning_rate=1.0, n_rounds=1)
        np.testing.assert_allclose(model.predict(X), y, atol=1e-9)

    def test_classifier_separates(self, separable):
        X, y = separable
        model = fit_boosting(X, y, "classify", max_depth=6, n_rounds=50)
        assert np.mean(model.predict(X) == y) > 0.9


class TestForest:
    def test_result_does_not_depend_on_threads(self, smooth):
        X, y = smooth
        one = fit_forest(X, y, "regress", n_estimators=8, seed=3, n_jobs=1)
        two = fit_forest(X, y, "regress", n_estimators=8, seed=3, n_jobs=2)
        np.testing.assert_array_equal(one.predict(X), two.predict(X))

    def test_seed_changes_the_forest(self, smooth):
        X, y = smooth
        a = fit_forest(X, y, "regress", n_estimators=4, seed=3).predict(X)
        b = fit_forest(X, y, "regress", n_estimators=4, seed=4).predict(X)
        assert not np.array_equal(a, b)

    def test_vote_is_binary(self, separable):
        X, y = separable
        model = fit_forest(X, y, "classify", n_estimators=15, seed=0)
        assert set(np.unique(model.predict(X)).tolist()) <= {0, 1}
        assert np.mean(model.predict(X) == y) > 0.9

    def test_bootstrap_cap(self, smooth):
        X, y = smooth
        model = fit_forest(X, y, "regress", n_estimators=3, max_samples=10, seed=0)
        for tree in model.trees:
            # a tree grown on 10 rows has at most 19 nodes
            assert tree.n_nodes <= 19


class TestKNN:
    @pytest.mark.parametrize("task", ["classify", "regress"])
    def test_kd_tree_and_brute_force_agree(self, task, separable, smooth):
        X, y = separable if task == "classify" else smooth
        rng = np.random.default_rng(8)
        queries = rng.uniform(size=(30, 3))
        kd = fit_knn(X, y, task, n_neighbours=5, algorithm="kd-tree")
        brute = fit_knn(X, y, task, n_neighbours=5, algorithm="brute")
        if task == "classify":
            np.testing.assert_array_equal(kd.predict(queries), brute.predict(queries))
        else:
            np.testing.assert_allclose(kd.predict(queries), brute.predict(queries), rtol=1e-12)
        _, kd_idx = kd.neighbours(queries)
        _, brute_idx = brute.neighbours(queries)
        np.testing.assert_array_equal(kd_idx, brute_idx)

    def test_neighbour_count_is_capped(self):
        model = fit_knn(np.arange(4.0).reshape(-1, 1), np.arange(4.0), "regress", n_neighbours=10)
        assert model.n_neighbours == 4
        assert model.predict(np.array([[0.0]]))[0] == pytest.approx(1.5)

    def test_auto_algorithm(self):
        assert resolve_algorithm("auto", 15) == "kd-tree"
        assert resolve_algorithm("auto", 16) == "brute"
        with pytest.raises(ConfigError):
            resolve_algorithm("ball-tree", 3)


class TestSVM:
    def test_classification_dual_is_feasible(self, separable):
        X, y = separable
        C = 10.0
        model, result = fit_svm(X, y, "classify", C=C, kernel="linear")
        signs = np.where(y > 0, 1.0, -1.0)
        assert result.converged
        assert np.all(result.alpha >= 0) and np.all(result.alpha <= C)
        assert abs(np.dot(result.alpha, signs)) < 1e-8
        assert np.mean(model.predict(X) == y) > 0.9

    def test_regression_dual_is_feasible(self, smooth):
        X, y = smooth
        C = 10.0
        model, result = fit_svm(X, y, "regress", C=C, gamma=1.0, epsilon=0.05)
        n = len(y)
        assert np.all(result.alpha >= 0) and np.all(result.alpha <= C)
        assert abs(result.alpha[:n].sum() - result.alpha[n:].sum()) < 1e-8
        assert np.sqrt(np.mean((model.predict(X) - y) ** 2)) < 0.2

    @pytest.mark.parametrize("task", ["classify", "regress"])
    def test_kkt_violation_of_the_returned_multipliers(self, task, separable, smooth):
        X, y = separable if task == "classify" else smooth
        C, gamma, epsilon = 10.0, 1.0, 0.05
        _, result = fit_svm(X, y, task, C=C, gamma=gamma, kernel="rbf", epsilon=epsilon, tol=1e-3)
        K = kernel_matrix(X, X, "rbf", gamma)
        if task == "classify":
            signs = np.where(y > 0, 1.0, -1.0)
            p = -np.ones(len(y))
        else:
            signs = np.concatenate([np.ones(len(y)), -np.ones(len(y))])
            p = np.concatenate([epsilon - y, epsilon + y])
            K = np.block([[K, K], [K, K]])
        # gradient recomputed from scratch, not the solver's running copy
        G = (np.outer(signs, signs) * K) @ result.alpha + p
        minus_yG = -signs * G
        up = np.where(signs > 0, result.alpha < C, result.alpha > 0)
        low = np.where(signs > 0, result.alpha > 0, result.alpha < C)
        violation = minus_yG[up].max() - minus_yG[low].min()
        assert result.converged
        assert violation < 1e-3 + 1e-9
        assert np.all((result.alpha >= 0) & (result.alpha <= C))

    def test_single_class_is_degenerate(self, separable):
        X, _ = separable
        with pytest.raises(DegenerateModelError):
            fit_svm(X, np.ones(len(X)), "classify")

    def test_training_cap_is_recorded(self, separable):
        X, y = separable
        spec = LearnerSpec("svm", "classify", {"C": 10, "gamma": 0.1, "kernel": "rbf"})
        model = fit(spec, X, y, {"max_train_rows": 50})
        assert model.info["svm_train_cap"] == {"rows": 50, "of": 80}

    def test_unknown_kernel(self, separable):
        with pytest.raises(ConfigError):
            fit_svm(*separable, "classify", kernel="poly")


class TestNetwork:
    @staticmethod
    def _smooth_network(rng, n_inputs, hidden_layers, width, margin):
        """Random network and rows whose hidden pre-activations all stay ``margin`` away from 0."""
        while True:
            # positive biases keep rows with all-zero hidden inputs off the ReLU kink
            params = [(W, rng.uniform(0.1, 0.3, size=b.shape)) for W, b in init_params(n_inputs, hidden_layers, width, rng)]
            X = rng.normal(size=(6, n_inputs))
            inputs, clear = X, True
            for W, b in params[:-1]:
                pre = inputs @ W + b
                clear = clear and np.abs(pre).min() > margin
                inputs = np.maximum(pre, 0.0)
            if clear:
                return params, X

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("task", ["classify", "regress"])
    def test_gradients_match_finite_differences(self, task, seed):
        rng = np.random.default_rng(seed)
        step = 1e-5
        params, X = self._smooth_network(rng, 3, 1 + seed % 3, 4, margin=1e-2)
        y = (rng.uniform(size=6) > 0.5).astype(float) if task == "classify" else rng.normal(size=6)
        _, grads = loss_and_gradients(params, X, y, task)
        for layer, (W, b) in enumerate(params):
            for array, grad in ((W, grads[layer][0]), (b, grads[layer][1])):
                numeric = np.zeros_like(array)
                for index in np.ndindex(array.shape):
                    saved = array[index]
                    array[index] = saved + step
                    up, _ = loss_and_gradients(params, X, y, task)
                    array[index] = saved - step
                    down, _ = loss_and_gradients(params, X, y, task)
                    array[index] = saved
                    numeric[index] = (up - down) / (2 * step)
                scale = max(np.linalg.norm(numeric) + np.linalg.norm(grad), 1e-8)
                assert np.linalg.norm(numeric - grad) / scale < 1e-4

    def test_training_reduces_loss(self, smooth):
        X, y = smooth
        model = fit_network(X, y, "regress", hidden_layers=2, width=16, epochs=30, batch_size=16, learning_rate=0.01)
        assert model.loss_history[-1] < model.loss_history[0]

    def test_seeded(self, separable):
        X, y = separable
        a = fit_network(X, y, "classify", width=8, epochs=3, seed=4)
        b = fit_network(X, y, "classify", width=8, epochs=3, seed=4)
        np.testing.assert_array_equal(a.params[0][0], b.params[0][0])
