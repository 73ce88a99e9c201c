"""
Multiquadric surface fitting baseline.

With a zero offset the multiquadric basis is the plain distance ``phi(r) = r``, which
makes the interpolator equivalent to kriging with a linear variogram. Weights come from
the bordered system ``[Phi 1; 1' 0] [w; lambda] = [phi0; 1]`` and always sum to one.
Weights below a threshold (negative ones included) are pruned and the rest re-solved.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.spatial.distance import cdist, pdist

from .const import DEFAULT_SURFACE, PIVOT_TOLERANCE
from .dataset import GaugeCatalog, SeriesTable, gauge_columns
from .exceptions import DataError, SingularSystemError
from .metrics import MetricReport, MetricStat, average_folds, rmse, score_predictions
from .preprocess import FoldPlan

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SurfaceWeights:
    gauge_ids: Tuple[str, ...]
    w: np.ndarray
    lagrange: float
    distances: np.ndarray
    target_xy: np.ndarray
    gauge_xys: np.ndarray
    passes: int = 0

    def estimate(self, readings: np.ndarray) -> np.ndarray:
        """Weighted sum of gauge readings; ``readings`` has one column per gauge."""
        return np.asarray(readings, dtype=float) @ self.w


def bordered_system(target_xy: np.ndarray, gauge_xys: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Matrix and right-hand side of the weight system."""
    n = gauge_xys.shape[0]
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = cdist(gauge_xys, gauge_xys)
    A[n, :n] = 1.0
    A[:n, n] = 1.0
    b = np.ones(n + 1)
    b[:n] = cdist(target_xy.reshape(1, 2), gauge_xys)[0]
    return A, b


def solve_weights(
    target_xy: Sequence[float],
    gauge_xys: np.ndarray,
    gauge_ids: Optional[Sequence[str]] = None,
) -> SurfaceWeights:
    """
    Solve the interpolation weights of gauges for a target position.

    Args:
        target_xy: Target easting/northing in metres
        gauge_xys: Gauge positions, shape (n, 2)
        gauge_ids: Gauge ids (default g0, g1, ...)

    Returns:
        SurfaceWeights before pruning

    Raises:
        SingularSystemError: On duplicate gauge positions or a near-zero pivot
    """
    target = np.asarray(target_xy, dtype=float).reshape(2)
    xys = np.asarray(gauge_xys, dtype=float).reshape(-1, 2)
    n = xys.shape[0]
    ids = tuple(gauge_ids) if gauge_ids is not None else tuple(f"g{i}" for i in range(n))
    if n == 0:
        raise DataError("surface fitting needs at least one gauge")
    if len(ids) != n:
        raise DataError(f"{len(ids)} gauge ids for {n} positions")
    distances = cdist(target.reshape(1, 2), xys)[0]
    if n == 1:
        return SurfaceWeights(ids, np.ones(1), float(distances[0]), distances, target, xys)
    if np.any(pdist(xys) == 0):
        raise SingularSystemError(f"duplicate gauge positions among {list(ids)}")

    A, b = bordered_system(target, xys)
    lu, piv = lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_TOLERANCE * max(1.0, np.abs(A).max()):
        raise SingularSystemError(f"near-singular weight system for gauges {list(ids)}")
    solution = lu_solve((lu, piv), b)
    return SurfaceWeights(ids, solution[:n], float(solution[n]), distances, target, xys)


def prune_weights(sw: SurfaceWeights, threshold: float = DEFAULT_SURFACE["prune_threshold"]) -> SurfaceWeights:
    """
    Drop gauges with weight below the threshold and re-solve until none is left.

    Each pass removes at least one gauge, so at most n - 1 passes run.
    """
    current = sw
    passes = sw.passes
    while len(current.gauge_ids) > 1 and np.any(current.w < threshold):
        keep = np.flatnonzero(current.w >= threshold)
        logger.debug(
            f"Pruning {len(current.gauge_ids) - keep.size} gauges "
            f"({', '.join(g for i, g in enumerate(current.gauge_ids) if i not in keep)})"
        )
        current = solve_weights(
            current.target_xy,
            current.gauge_xys[keep],
            [current.gauge_ids[i] for i in keep],
        )
        passes += 1
    return SurfaceWeights(
        current.gauge_ids,
        current.w,
        current.lagrange,
        current.distances,
        current.target_xy,
        current.gauge_xys,
        passes,
    )


def fitted_weights(
    target_xy: np.ndarray,
    catalog: GaugeCatalog,
    gauge_ids: Sequence[str],
    threshold: float = DEFAULT_SURFACE["prune_threshold"],
) -> SurfaceWeights:
    return prune_weights(solve_weights(target_xy, catalog.positions(gauge_ids), gauge_ids), threshold)


def nearest_gauges(table: SeriesTable, catalog: GaugeCatalog) -> List[str]:
    """Gauge columns of a table ordered by (distance to the site, id)."""
    if table.row_sites is not None:
        raise DataError(f"the surface-fit baseline runs per site, {table.site_id} is pooled")
    origin = catalog.position(table.site_id)
    gauges = gauge_columns(table)
    distances = [float(np.hypot(*(catalog.position(g) - origin))) for g in gauges]
    return [g for _, g in sorted(zip(distances, gauges))]


@dataclass(frozen=True)
class GaugeCountChoice:
    candidate_ks: Tuple[int, ...]
    rmse: Dict[int, Optional[float]]
    k: int
    weights: SurfaceWeights
    n_rows: Dict[int, int] = field(default_factory=dict)


def default_candidates(available: int, max_candidates: int = DEFAULT_SURFACE["max_candidates"]) -> List[int]:
    if available < 1:
        raise DataError("no external gauges available for surface fitting")
    if available == 1:
        return [1]
    return list(range(2, min(max_candidates, available) + 1))


def select_gauge_count(
    table: SeriesTable,
    catalog: GaugeCatalog,
    candidate_ks: Optional[Sequence[int]] = None,
    train_rows: Optional[np.ndarray] = None,
    threshold: float = DEFAULT_SURFACE["prune_threshold"],
    max_candidates: int = DEFAULT_SURFACE["max_candidates"],
) -> GaugeCountChoice:
    """
    Choose how many of the nearest gauges to interpolate from.

    For each k, the k nearest gauges are solved and pruned, and the RMSE is taken over
    the rows where the target and all k gauges are present. The smallest k with the
    lowest RMSE wins.

    Raises:
        DataError: If no candidate k has an evaluable row
    """
    ordered = nearest_gauges(table, catalog)
    ks = sorted(set(candidate_ks)) if candidate_ks else default_candidates(len(ordered), max_candidates)
    if ks[0] < 1 or ks[-1] > len(ordered):
        raise DataError(f"candidate gauge counts {ks} outside 1..{len(ordered)}")
    rows = np.arange(table.n_rows) if train_rows is None else np.asarray(train_rows)
    origin = catalog.position(table.site_id)
    target = table.target[rows]

    scores: Dict[int, Optional[float]] = {}
    counts: Dict[int, int] = {}
    weights: Dict[int, SurfaceWeights] = {}
    for k in ks:
        nearest = ordered[:k]
        readings = np.column_stack([table.column(g)[rows] for g in nearest])
        usable = ~np.isnan(target) & ~np.isnan(readings).any(axis=1)
        counts[k] = int(usable.sum())
        if not usable.any():
            scores[k] = None
            continue
        sw = fitted_weights(origin, catalog, nearest, threshold)
        kept = [nearest.index(g) for g in sw.gauge_ids]
        scores[k] = rmse(target[usable], sw.estimate(readings[usable][:, kept]))
        weights[k] = sw
        logger.debug(f"Site {table.site_id}: k={k} RMSE {scores[k]:.4f} mm over {counts[k]} rows")

    evaluable = [k for k in ks if scores[k] is not None]
    if not evaluable:
        raise DataError(f"site {table.site_id}: no candidate gauge count has an evaluable row")
    best = min(evaluable, key=lambda k: (scores[k], k))
    logger.info(
        f"Site {table.site_id}: {best} nearest gauges chosen, {len(weights[best].gauge_ids)} kept after pruning"
    )
    return GaugeCountChoice(tuple(ks), scores, best, weights[best], counts)


@dataclass(frozen=True)
class BaselinePrediction:
    predictions: np.ndarray
    n_missing: int
    report: Optional[MetricReport]


def baseline_predict(
    table: SeriesTable,
    catalog: GaugeCatalog,
    choice: GaugeCountChoice,
    rows: Optional[np.ndarray] = None,
    threshold: float = DEFAULT_SURFACE["prune_threshold"],
) -> BaselinePrediction:
    """
    Interpolate the target from the chosen gauges.

    Where some chosen gauges are missing, weights are re-solved over the present ones.
    Samples with no chosen gauge present are NaN, excluded from scoring and counted.
    """
    rows = np.arange(table.n_rows) if rows is None else np.asarray(rows)
    gauges = list(choice.weights.gauge_ids)
    readings = np.column_stack([table.column(g)[rows] for g in gauges])
    present = ~np.isnan(readings)
    origin = catalog.position(table.site_id)
    cache: Dict[Tuple[bool, ...], Tuple[SurfaceWeights, List[int]]] = {}
    predictions = np.full(len(rows), np.nan)

    for pattern in {tuple(p) for p in present.tolist()}:
        if not any(pattern):
            continue
        if all(pattern):
            sw, kept = choice.weights, list(range(len(gauges)))
        else:
            subset = [g for g, p in zip(gauges, pattern) if p]
            sw = fitted_weights(origin, catalog, subset, threshold)
            kept = [gauges.index(g) for g in sw.gauge_ids]
        cache[pattern] = (sw, kept)
    for i, pattern in enumerate(map(tuple, present.tolist())):
        if pattern in cache:
            sw, kept = cache[pattern]
            predictions[i] = float(readings[i, kept] @ sw.w)

    missing = np.isnan(predictions)
    n_missing = int(missing.sum())
    if n_missing:
        logger.warning(f"Site {table.site_id}: {n_missing} samples without any chosen gauge excluded from metrics")
    truth = table.target[rows]
    scored = ~missing & ~np.isnan(truth)
    report = score_predictions(truth[scored], predictions[scored]) if scored.any() else None
    return BaselinePrediction(predictions, n_missing, report)


@dataclass(frozen=True)
class BaselineFold:
    fold: int
    test_rows: np.ndarray
    choice: GaugeCountChoice
    predictions: np.ndarray
    n_missing: int
    report: Optional[MetricReport]


@dataclass(frozen=True)
class BaselineRun:
    site_id: str
    fold_plan: FoldPlan
    folds: Tuple[BaselineFold, ...]
    average: Dict[str, MetricStat]
    timestamps: object
    truth: np.ndarray
    predictions: np.ndarray
    n_missing: int


def run_baseline(
    table: SeriesTable,
    catalog: GaugeCatalog,
    fold_plan: FoldPlan,
    candidate_ks: Optional[Sequence[int]] = None,
    threshold: float = DEFAULT_SURFACE["prune_threshold"],
    max_candidates: int = DEFAULT_SURFACE["max_candidates"],
) -> BaselineRun:
    """
    Cross-validate the surface fit on a fold plan.

    The gauge count is chosen on each fold's training rows and applied to its test rows.
    Rows without a target are removed first, as in the two-step run, so the same fold
    plan addresses the same samples.
    """
    table = table.select_rows(table.present_target)
    if fold_plan.n_rows != table.n_rows:
        raise DataError(f"fold plan covers {fold_plan.n_rows} rows, table {table.site_id} has {table.n_rows}")
    predictions = np.full(table.n_rows, np.nan)
    folds = []
    for fold in range(fold_plan.n_folds):
        test_rows = fold_plan.test_indices(fold)
        choice = select_gauge_count(
            table, catalog, candidate_ks, fold_plan.train_indices(fold), threshold, max_candidates
        )
        result = baseline_predict(table, catalog, choice, test_rows, threshold)
        predictions[test_rows] = result.predictions
        folds.append(BaselineFold(fold, test_rows, choice, result.predictions, result.n_missing, result.report))
        if result.report is not None:
            logger.info(
                f"Baseline fold {fold}: k={choice.k}, precision {result.report.precision:.3f}, "
                f"recall {result.report.recall:.3f}, RMSE {result.report.rmse:.4f} mm"
            )
    reports = [f.report for f in folds if f.report is not None]
    if not reports:
        raise DataError(f"site {table.site_id}: the baseline produced no scorable fold")
    return BaselineRun(
        site_id=table.site_id,
        fold_plan=fold_plan,
        folds=tuple(folds),
        average=average_folds(reports),
        timestamps=table.timestamps,
        truth=np.array(table.target),
        predictions=predictions,
        n_missing=int(sum(f.n_missing for f in folds)),
    )
