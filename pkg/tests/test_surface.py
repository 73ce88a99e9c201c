"""Tests for the multiquadric surface-fit baseline."""

from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from raingap.const import KIND_STATION, ORIGIN_GAUGE, ORIGIN_STATION
from raingap.dataset import GaugeCatalog, GaugeEntry, SeriesTable
from raingap.exceptions import DataError, SingularSystemError
from raingap.preprocess import make_folds
from raingap.surface import (
    baseline_predict,
    bordered_system,
    default_candidates,
    nearest_gauges,
    prune_weights,
    run_baseline,
    select_gauge_count,
    solve_weights,
)


@pytest.fixture
def layout():
    """Site T at the origin with four gauges at increasing distance."""
    catalog = GaugeCatalog(
        (
            GaugeEntry("T", 0.0, 0.0, KIND_STATION),
            GaugeEntry("G3", -5000.0, 0.0),
            GaugeEntry("G1", 1000.0, 0.0),
            GaugeEntry("G4", 0.0, -8000.0),
            GaugeEntry("G2", 0.0, 3000.0),
        )
    )
    rng = np.random.default_rng(17)
    n = 96
    target = rng.gamma(0.7, 1.0, size=n) * (rng.random(n) < 0.3)
    gauges = {
        "G1": target.copy(),
        "G2": rng.gamma(0.7, 1.0, size=n),
        "G3": rng.gamma(0.7, 1.0, size=n),
        "G4": rng.gamma(0.7, 1.0, size=n),
    }
    names = ("pressure", "G1", "G2", "G3", "G4")
    features = np.column_stack([rng.normal(1000.0, 5.0, size=n)] + [gauges[g] for g in names[1:]])
    table = SeriesTable(
        site_id="T",
        timestamps=pd.date_range("2021-06-01", periods=n, freq="30min", tz="UTC"),
        target=target,
        features=features,
        feature_names=names,
        origins=(ORIGIN_STATION,) + (ORIGIN_GAUGE,) * 4,
    )
    return table, catalog


class TestSolveWeights:
    def test_matches_a_dense_solve(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            xys = rng.uniform(-25_000, 25_000, size=(n, 2))
            target = rng.uniform(-25_000, 25_000, size=2)
            sw = solve_weights(target, xys)
            A, b = bordered_system(target, xys)
            dense = np.linalg.solve(A, b)
            np.testing.assert_allclose(sw.w, dense[:n], atol=1e-8)
            assert sw.w.sum() == pytest.approx(1.0, abs=1e-10)

    def test_symmetric_pair_shares_equally(self):
        sw = solve_weights([0.0, 0.0], np.array([[-1000.0, 0.0], [1000.0, 0.0]]))
        np.testing.assert_allclose(sw.w, [0.5, 0.5], atol=1e-12)
        assert sw.lagrange == pytest.approx(0.0, abs=1e-9)

    def test_target_on_a_gauge_reproduces_it(self):
        xys = np.array([[500.0, 500.0], [3000.0, -200.0], [-1500.0, 2500.0]])
        sw = solve_weights(xys[0], xys)
        np.testing.assert_allclose(sw.w, [1.0, 0.0, 0.0], atol=1e-10)

    def test_single_gauge(self):
        sw = solve_weights([0.0, 0.0], np.array([[3000.0, 4000.0]]), ["G1"])
        np.testing.assert_array_equal(sw.w, [1.0])
        assert sw.lagrange == pytest.approx(5000.0)
        assert sw.gauge_ids == ("G1",)

    def test_duplicate_positions(self):
        with pytest.raises(SingularSystemError):
            solve_weights([0.0, 0.0], np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 0.0]]))

    def test_no_gauges(self):
        with pytest.raises(DataError):
            solve_weights([0.0, 0.0], np.empty((0, 2)))


class TestPruneWeights:
    def test_gauge_shadowed_along_a_line_is_dropped(self):
        # the far gauge gets weight 0 behind the near one
        sw = solve_weights([0.0, 0.0], np.array([[1000.0, 0.0], [2000.0, 0.0]]), ["near", "far"])
        np.testing.assert_allclose(sw.w, [1.0, 0.0], atol=1e-12)
        pruned = prune_weights(sw, 0.001)
        assert pruned.gauge_ids == ("near",)
        assert pruned.passes == 1

    def test_surviving_weights_clear_the_threshold(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            n = int(rng.integers(2, 10))
            sw = prune_weights(solve_weights(rng.uniform(-2e4, 2e4, 2), rng.uniform(-2e4, 2e4, (n, 2))), 0.001)
            assert len(sw.gauge_ids) == 1 or np.all(sw.w >= 0.001)
            assert sw.w.sum() == pytest.approx(1.0, abs=1e-10)
            assert sw.passes <= n - 1


class TestCandidates:
    def test_default_candidates(self):
        assert default_candidates(1) == [1]
        assert default_candidates(5) == [2, 3, 4, 5]
        assert default_candidates(20) == list(range(2, 13))
        with pytest.raises(DataError):
            default_candidates(0)


class TestSelectGaugeCount:
    def test_nearest_gauges_are_ordered_by_distance(self, layout):
        table, catalog = layout
        assert nearest_gauges(table, catalog) == ["G1", "G2", "G3", "G4"]

    def test_exact_copy_wins_with_one_gauge(self, layout):
        table, catalog = layout
        choice = select_gauge_count(table, catalog, [1, 2, 3, 4])
        assert choice.k == 1
        assert choice.rmse[1] == pytest.approx(0.0, abs=1e-12)
        assert choice.weights.gauge_ids == ("G1",)

    @staticmethod
    def _dense_pruned(xys, ids, threshold):
        ids = list(ids)
        while True:
            A, b = bordered_system(np.zeros(2), xys)
            w = np.linalg.solve(A, b)[: len(ids)]
            if len(ids) == 1 or np.all(w >= threshold):
                return ids, w
            keep = np.flatnonzero(w >= threshold)
            xys, ids = xys[keep], [ids[i] for i in keep]

    def test_matches_an_exhaustive_search(self):
        rng = np.random.default_rng(29)
        n, n_gauges = 300, 6
        angles = rng.uniform(0.0, 2 * np.pi, n_gauges)
        radii = rng.uniform(2000.0, 20000.0, n_gauges)
        xys = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        ids = [f"G{i}" for i in range(n_gauges)]
        catalog = GaugeCatalog((GaugeEntry("T", 0.0, 0.0, KIND_STATION),) + tuple(
            GaugeEntry(g, float(x), float(y)) for g, (x, y) in zip(ids, xys)
        ))
        target = rng.gamma(0.7, 1.0, size=n)
        readings = np.column_stack(
            [np.clip(target * rng.uniform(0.3, 1.2) + rng.normal(0.0, 0.3, n), 0.0, None) for _ in ids]
        )
        readings[rng.random(readings.shape) < 0.05] = np.nan
        target[rng.random(n) < 0.05] = np.nan
        table = SeriesTable(
            "T",
            pd.date_range("2021-06-01", periods=n, freq="30min", tz="UTC"),
            target,
            readings,
            tuple(ids),
            (ORIGIN_GAUGE,) * n_gauges,
        )

        order = sorted(range(n_gauges), key=lambda i: (np.hypot(*xys[i]), ids[i]))
        assert nearest_gauges(table, catalog) == [ids[i] for i in order]
        expected = {}
        for k in range(1, n_gauges + 1):
            chosen = order[:k]
            usable = ~np.isnan(target) & ~np.isnan(readings[:, chosen]).any(axis=1)
            kept, w = self._dense_pruned(xys[chosen], [ids[i] for i in chosen], 0.001)
            estimate = readings[usable][:, [ids.index(g) for g in kept]] @ w
            expected[k] = float(np.sqrt(np.mean((target[usable] - estimate) ** 2)))

        choice = select_gauge_count(table, catalog, list(range(1, n_gauges + 1)), threshold=0.001)
        for k, value in expected.items():
            assert choice.rmse[k] == pytest.approx(value, rel=1e-9)
        assert choice.k == min(expected, key=lambda k: (expected[k], k))

    def test_equal_scores_go_to_the_smaller_count(self):
        catalog = GaugeCatalog(
            (
                GaugeEntry("T", 0.0, 0.0, KIND_STATION),
                GaugeEntry("G1", 1000.0, 0.0),
                GaugeEntry("G2", 2000.0, 0.0),
                GaugeEntry("G3", 3000.0, 0.0),
            )
        )
        rng = np.random.default_rng(31)
        n = 64
        target = rng.gamma(0.7, 1.0, size=n)
        readings = np.column_stack([target + rng.normal(0.0, 0.2, n), rng.random(n), rng.random(n)])
        table = SeriesTable(
            "T",
            pd.date_range("2021-06-01", periods=n, freq="30min", tz="UTC"),
            target,
            readings,
            ("G1", "G2", "G3"),
            (ORIGIN_GAUGE,) * 3,
        )
        # gauges in line behind G1 are pruned, so both counts interpolate from G1 alone
        choice = select_gauge_count(table, catalog, [3, 2])
        assert choice.rmse[2] == choice.rmse[3]
        assert choice.k == 2
        assert choice.weights.gauge_ids == ("G1",)

    def test_out_of_range_candidates(self, layout):
        table, catalog = layout
        with pytest.raises(DataError):
            select_gauge_count(table, catalog, [2, 5])

    def test_pooled_tables_are_rejected(self, layout):
        table, catalog = layout
        pooled = replace(table, row_sites=np.full(table.n_rows, "T"))
        with pytest.raises(DataError):
            nearest_gauges(pooled, catalog)


class TestBaselinePredict:
    def test_missing_gauges_are_re_solved_or_counted(self, layout):
        table, catalog = layout
        choice = select_gauge_count(table, catalog, [2])
        assert choice.weights.gauge_ids == ("G1", "G2")
        assert np.all(choice.weights.w > 0.001)

        features = table.features.copy()
        features[3, 2] = np.nan
        features[5, 1:3] = np.nan
        gappy = replace(table, features=features)
        result = baseline_predict(gappy, catalog, choice)

        assert result.predictions[3] == pytest.approx(table.column("G1")[3])
        assert np.isnan(result.predictions[5])
        assert result.n_missing == 1
        both = np.column_stack([table.column("G1"), table.column("G2")])
        assert result.predictions[0] == pytest.approx(float(choice.weights.estimate(both[:1])[0]))
        assert result.report.n == table.n_rows - 1


class TestRunBaseline:
    def test_cross_validated_on_synthetic_site(self, site_table, synth_dataset):
        n = int(site_table.present_target.sum())
        plan = make_folds(n, 3, seed=4)
        run = run_baseline(site_table, synth_dataset.catalog, plan)
        assert len(run.folds) == 3
        for fold in run.folds:
            assert fold.choice.k in fold.choice.candidate_ks
        assert set(run.average) >= {"rmse", "acc"}
        assert run.n_missing == int(np.isnan(run.predictions).sum())
        assert np.all(run.predictions[~np.isnan(run.predictions)] >= 0.0)

    def test_fold_plan_must_cover_the_table(self, site_table, synth_dataset):
        plan = make_folds(int(site_table.present_target.sum()) + 2, 3, seed=4)
        with pytest.raises(DataError):
            run_baseline(site_table, synth_dataset.catalog, plan)

    def test_missing_target_rows_are_dropped_first(self, layout):
        table, catalog = layout
        target = table.target.copy()
        target[[10, 50]] = np.nan
        gappy = replace(table, target=target)
        plan = make_folds(table.n_rows - 2, 3, seed=4)
        run = run_baseline(gappy, catalog, plan, candidate_ks=[1, 2])
        assert len(run.predictions) == table.n_rows - 2
        assert run.n_missing == 0
