"""
Two-step cross-validated precipitation imputation.

Per fold: complete-case training rows, imputed test rows and a training-fitted min-max
scaler. Every learner family classifies rain / no rain and the family with the best
mean fold accuracy is kept. Every family then regresses amplitudes on the training
rain rows for the test rows the kept classifier labelled 1, and the family with the
lowest mean fold RMSE is kept. Final predictions are 0 for class 0 and the clipped
regressed value for class 1, and are scored against the raw mm truth.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .config import Settings
from .const import (
    DEFAULT_CORE_FEATURES,
    DEFAULT_FOLDS,
    DEFAULT_IMPUTER,
    DEFAULT_SEED,
    FAMILY_ORDER,
    FEATURE_COMBINED,
    TASK_CLASSIFY,
    TASK_REGRESS,
)
from .dataset import RegionSpec, SeriesTable, pool_region, resolve_feature_set
from .exceptions import ConfigError, DataError, DegenerateModelError, FoldError, RaingapError, TrainingDataError
from .imputer import ImputerModel, fit_imputer, impute_rows
from .learners import FittedModel, LearnerSpec, fit, predict
from .metrics import MetricReport, MetricStat, average_folds, classification_metrics, rmse, score_predictions
from .preprocess import (
    FoldPlan,
    MinMaxScaler,
    apply_scaler,
    complete_case,
    fit_scaler,
    make_folds,
    prepare_table,
    to_binary,
)
from .tuning import TunedStore

logger = logging.getLogger(__name__)


def fold_seed(seed: int, fold: int) -> int:
    """Learner seed of one fold, derived from the run seed."""
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


@dataclass(frozen=True)
class HurdleConfig:
    feature_set: str = FEATURE_COMBINED
    cyclic: bool = True
    n_folds: int = DEFAULT_FOLDS
    seed: int = DEFAULT_SEED
    families: Tuple[str, ...] = FAMILY_ORDER
    core_features: Tuple[str, ...] = DEFAULT_CORE_FEATURES
    options: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    imputer: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_IMPUTER))
    threads: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_set", resolve_feature_set(self.feature_set))
        families = tuple(f for f in FAMILY_ORDER if f in self.families)
        unknown = set(self.families) - set(FAMILY_ORDER)
        if unknown or not families:
            raise ConfigError(f"unknown or empty learner family selection {sorted(self.families)}")
        object.__setattr__(self, "families", families)

    @classmethod
    def from_settings(
        cls,
        settings: Settings,
        feature_set: str = FEATURE_COMBINED,
        cyclic: bool = True,
        families: Optional[Sequence[str]] = None,
    ) -> "HurdleConfig":
        return cls(
            feature_set=feature_set,
            cyclic=cyclic,
            n_folds=settings.folds,
            seed=settings.seed,
            families=tuple(families or FAMILY_ORDER),
            core_features=tuple(settings.core_features),
            options={
                "boosting": dict(settings.boosting),
                "forest": dict(settings.forest),
                "knn": dict(settings.knn),
                "svm": dict(settings.svm),
                "network": dict(settings.network),
            },
            imputer=dict(settings.imputer),
            threads=settings.threads,
        )

    def snapshot(self) -> Dict[str, Any]:
        return {
            "feature_set": self.feature_set,
            "cyclic": self.cyclic,
            "n_folds": self.n_folds,
            "seed": self.seed,
            "families": list(self.families),
            "core_features": list(self.core_features),
            "options": {k: dict(v) for k, v in sorted(self.options.items())},
            "imputer": dict(self.imputer),
        }


@dataclass(frozen=True)
class PreparedFold:
    """Scaled training and test rows of one fold."""

    fold: int
    train_rows: np.ndarray
    test_rows: np.ndarray
    X_train: np.ndarray
    y_train: np.ndarray
    X_test: np.ndarray
    y_test: np.ndarray
    scaler: MinMaxScaler
    imputer: Optional[ImputerModel]


def prepare_fold(table: SeriesTable, plan: FoldPlan, fold: int, config: HurdleConfig) -> PreparedFold:
    """
    Build one fold without leaking test rows into anything that is fitted.

    Raises:
        FoldError: If no complete training row remains
    """
    train_idx = plan.train_indices(fold)
    test_idx = plan.test_indices(fold)
    X_all = table.features[train_idx]
    try:
        kept = complete_case(X_all, table.target[train_idx])
    except TrainingDataError as e:
        raise FoldError(fold, str(e)) from e
    train_rows = train_idx[kept]
    X_train_raw = table.features[train_rows]
    X_test_raw = table.features[test_idx]

    imputer = None
    if np.isnan(X_test_raw).any() and X_train_raw.shape[1] < 2:
        means = X_train_raw.mean(axis=0)
        X_test_raw = np.where(np.isnan(X_test_raw), means, X_test_raw)
    elif np.isnan(X_test_raw).any():
        imputer = fit_imputer(
            X_train_raw,
            table.feature_names,
            max_rounds=int(config.imputer.get("max_rounds", DEFAULT_IMPUTER["max_rounds"])),
            n_estimators=int(config.imputer.get("n_estimators", DEFAULT_IMPUTER["n_estimators"])),
            tol=float(config.imputer.get("tol", DEFAULT_IMPUTER["tol"])),
            max_samples=config.imputer.get("max_samples"),
            seed=fold_seed(config.seed, fold),
            n_jobs=config.threads,
            missing_counts=np.isnan(X_all).sum(axis=0),
        )
        X_test_raw = impute_rows(imputer, X_test_raw, table.feature_names)

    scaler = fit_scaler(X_train_raw)
    logger.info(f"Fold {fold}: {len(train_rows)} complete training rows, {len(test_idx)} test rows")
    return PreparedFold(
        fold=fold,
        train_rows=train_rows,
        test_rows=test_idx,
        X_train=apply_scaler(scaler, X_train_raw),
        y_train=table.target[train_rows],
        X_test=apply_scaler(scaler, X_test_raw),
        y_test=table.target[test_idx],
        scaler=scaler,
        imputer=imputer,
    )


@dataclass(frozen=True)
class StepSelection:
    """Fold scores per family and the chosen family of one step."""

    task: str
    per_fold: Dict[str, List[Optional[float]]]
    mean_scores: Dict[str, float]
    winner: Optional[str]
    per_fold_winners: List[Optional[str]]
    labels: Dict[str, str]
    failed: Dict[str, str]

    @property
    def winner_label(self) -> Optional[str]:
        return None if self.winner is None else self.labels.get(self.winner, self.winner)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "task": self.task,
            "winner": self.winner_label,
            "mean_scores": {self.labels.get(f, f): s for f, s in self.mean_scores.items()},
            "per_fold": {self.labels.get(f, f): list(v) for f, v in self.per_fold.items()},
            "per_fold_winners": [None if w is None else self.labels.get(w, w) for w in self.per_fold_winners],
            "failed": dict(self.failed),
        }


def select_family(task: str, per_fold: Mapping[str, Sequence[Optional[float]]]) -> Tuple[Dict[str, float], Optional[str]]:
    """
    Mean fold score per family and the winner.

    Classification keeps the highest mean accuracy, regression the lowest mean RMSE;
    folds without a score are skipped. Ties go to the earlier family in the fixed order.
    """
    means: Dict[str, float] = {}
    for family in FAMILY_ORDER:
        scores = [s for s in per_fold.get(family, []) if s is not None]
        if family in per_fold and scores:
            means[family] = float(np.mean(scores))
    winner = None
    for family, score in means.items():
        if winner is None:
            winner = family
        elif task == TASK_CLASSIFY and score > means[winner]:
            winner = family
        elif task == TASK_REGRESS and score < means[winner]:
            winner = family
    return means, winner


def _fold_winner(task: str, scores: Mapping[str, Optional[float]]) -> Optional[str]:
    present = {f: s for f, s in scores.items() if s is not None}
    if not present:
        return None
    _, winner = select_family(task, {f: [s] for f, s in present.items()})
    return winner


@dataclass(frozen=True)
class FoldResult:
    fold: int
    test_rows: np.ndarray
    classifier: str
    regressor: Optional[str]
    class_pred: np.ndarray
    final: np.ndarray
    report: MetricReport


@dataclass(frozen=True)
class HurdleRun:
    """Result of a cross-validated two-step run on one table."""

    site_id: str
    fold_plan: FoldPlan
    classify: StepSelection
    regress: StepSelection
    folds: Tuple[FoldResult, ...]
    average: Dict[str, MetricStat]
    timestamps: Any
    truth: np.ndarray
    predictions: np.ndarray
    config: Dict[str, Any]
    row_sites: Optional[np.ndarray] = None
    models: Dict[int, Dict[str, FittedModel]] = field(default_factory=dict, repr=False, compare=False)

    def series_rows(self) -> np.ndarray:
        """Row indices belonging to this run (one site's rows for a per-site view of a pooled run)."""
        if self.row_sites is not None and (self.row_sites == self.site_id).any():
            return np.flatnonzero(self.row_sites == self.site_id)
        return np.arange(len(self.truth))

    def for_site(self, site_id: str) -> "HurdleRun":
        """
        The rows of one member site of a pooled run, rescored per fold.

        Raises:
            DataError: If the run is not pooled or has no rows for the site
        """
        if self.row_sites is None:
            raise DataError(f"run {self.site_id} is not a pooled run")
        mask = self.row_sites == site_id
        if not mask.any():
            raise DataError(f"run {self.site_id} has no rows for site {site_id}")
        folds = []
        for result in self.folds:
            keep = mask[result.test_rows]
            if not keep.any():
                continue
            folds.append(
                replace(
                    result,
                    test_rows=result.test_rows[keep],
                    class_pred=result.class_pred[keep],
                    final=result.final[keep],
                    report=score_predictions(self.truth[result.test_rows[keep]], result.final[keep]),
                )
            )
        return replace(
            self,
            site_id=site_id,
            folds=tuple(folds),
            average=average_folds([f.report for f in folds]),
            models={},
        )


def _fit_predict(spec: LearnerSpec, X_train, y_train, X_test, options, n_jobs) -> Tuple[FittedModel, np.ndarray]:
    model = fit(spec, X_train, y_train, options, n_jobs)
    return model, predict(model, X_test)


def _run_step(
    task: str,
    folds: Sequence[PreparedFold],
    inputs: Mapping[int, Tuple[np.ndarray, np.ndarray, np.ndarray]],
    store: TunedStore,
    store_key: str,
    config: HurdleConfig,
) -> Tuple[Dict[str, Dict[int, Tuple[FittedModel, np.ndarray]]], Dict[str, str], Dict[str, str]]:
    """Fit every family on every fold that has inputs; failing families are dropped."""
    outputs: Dict[str, Dict[int, Tuple[FittedModel, np.ndarray]]] = {}
    failed: Dict[str, str] = {}
    labels: Dict[str, str] = {}
    for family in config.families:
        spec = LearnerSpec(family, task, store.get(store_key, family, task), config.seed)
        labels[family] = spec.label
        fold_ids = [f.fold for f in folds if f.fold in inputs]
        try:
            results = Parallel(n_jobs=config.threads, prefer="threads")(
                delayed(_fit_predict)(
                    replace(spec, seed=fold_seed(config.seed, k)),
                    inputs[k][0],
                    inputs[k][1],
                    inputs[k][2],
                    config.options.get(family),
                    1,
                )
                for k in fold_ids
            )
        except (RaingapError, FloatingPointError, np.linalg.LinAlgError) as e:
            logger.warning(f"{spec.label} {task} failed and is excluded: {e}")
            failed[family] = f"{type(e).__name__}: {e}"
            continue
        outputs[family] = dict(zip(fold_ids, results))
    return outputs, failed, labels


def run_hurdle(
    table: SeriesTable,
    store: TunedStore,
    config: HurdleConfig,
    fold_plan: Optional[FoldPlan] = None,
    store_key: Optional[str] = None,
) -> HurdleRun:
    """
    Run the cross-validated two-step imputation on one table.

    Args:
        table: Site (or pooled region) table
        store: Tuned parameters
        config: Run configuration
        fold_plan: Fold assignment to reuse (made from the config seed when None)
        store_key: Store key of the tuned parameters (default the table's site id)

    Returns:
        HurdleRun

    Raises:
        ConfigError: If tuned parameters are missing
        FoldError: If a fold has no complete training row or no training rain row
        DegenerateModelError: If no family could be fitted for a step
    """
    store_key = store_key or table.site_id
    store.require(store_key, config.families)
    table = prepare_table(table, config.feature_set, config.cyclic, config.core_features)
    plan = fold_plan or make_folds(table.n_rows, config.n_folds, config.seed)
    if plan.n_rows != table.n_rows:
        raise DataError(f"fold plan covers {plan.n_rows} rows, table {table.site_id} has {table.n_rows}")
    logger.info(
        f"Two-step run on {table.site_id}: {table.n_rows} rows, {len(table.feature_names)} features, "
        f"{plan.n_folds} folds"
    )

    folds = Parallel(n_jobs=config.threads, prefer="threads")(
        delayed(prepare_fold)(table, plan, k, config) for k in range(plan.n_folds)
    )

    for f in folds:
        if not (f.y_train > 0).any():
            raise FoldError(f.fold, "training fold has no rain rows")

    # classification
    class_inputs = {f.fold: (f.X_train, to_binary(f.y_train), f.X_test) for f in folds}
    class_out, class_failed, class_labels = _run_step(TASK_CLASSIFY, folds, class_inputs, store, store_key, config)
    if not class_out:
        raise DegenerateModelError(f"no classifier family could be fitted: {class_failed}")
    class_scores = {
        family: [classification_metrics(to_binary(f.y_test), out[f.fold][1]).accuracy for f in folds]
        for family, out in class_out.items()
    }
    class_means, classifier = select_family(TASK_CLASSIFY, class_scores)
    classify = StepSelection(
        task=TASK_CLASSIFY,
        per_fold=class_scores,
        mean_scores=class_means,
        winner=classifier,
        per_fold_winners=[
            _fold_winner(TASK_CLASSIFY, {fam: s[i] for fam, s in class_scores.items()}) for i in range(len(folds))
        ],
        labels=class_labels,
        failed=class_failed,
    )
    logger.info(f"Classifier chosen: {classify.winner_label} (mean accuracy {class_means[classifier]:.2f}%)")

    # regression on training rain rows, for the positions the chosen classifier marked as rain
    reg_inputs = {}
    positions: Dict[int, np.ndarray] = {}
    for f in folds:
        rain = f.y_train > 0
        positions[f.fold] = np.flatnonzero(class_out[classifier][f.fold][1] == 1)
        if positions[f.fold].size == 0:
            logger.info(f"Fold {f.fold}: no samples predicted as rain, regression skipped")
            continue
        reg_inputs[f.fold] = (f.X_train[rain], f.y_train[rain], f.X_test[positions[f.fold]])
    reg_out, reg_failed, reg_labels = _run_step(TASK_REGRESS, folds, reg_inputs, store, store_key, config)
    reg_scores: Dict[str, List[Optional[float]]] = {}
    for family, out in reg_out.items():
        reg_scores[family] = [
            rmse(f.y_test[positions[f.fold]], np.maximum(out[f.fold][1], 0.0)) if f.fold in out else None
            for f in folds
        ]
    reg_means, regressor = select_family(TASK_REGRESS, reg_scores)
    if reg_inputs and regressor is None:
        raise DegenerateModelError(f"no regressor family could be fitted: {reg_failed}")
    regress = StepSelection(
        task=TASK_REGRESS,
        per_fold=reg_scores,
        mean_scores=reg_means,
        winner=regressor,
        per_fold_winners=[
            _fold_winner(TASK_REGRESS, {fam: s[i] for fam, s in reg_scores.items()}) for i in range(len(folds))
        ],
        labels=reg_labels,
        failed=reg_failed,
    )
    if regressor is not None:
        logger.info(f"Regressor chosen: {regress.winner_label} (mean RMSE {reg_means[regressor]:.4f} mm)")

    # reassembly and scoring
    predictions = np.zeros(table.n_rows)
    results = []
    models: Dict[int, Dict[str, FittedModel]] = {}
    for f in folds:
        class_model, class_pred = class_out[classifier][f.fold]
        final = reassemble(class_pred, None if f.fold not in reg_inputs else reg_out[regressor][f.fold][1])
        predictions[f.test_rows] = final
        report = score_predictions(f.y_test, final)
        models[f.fold] = {TASK_CLASSIFY: class_model}
        if f.fold in reg_inputs:
            models[f.fold][TASK_REGRESS] = reg_out[regressor][f.fold][0]
        results.append(
            FoldResult(
                fold=f.fold,
                test_rows=f.test_rows,
                classifier=classify.winner_label,
                regressor=regress.winner_label if f.fold in reg_inputs else None,
                class_pred=np.asarray(class_pred, dtype=int),
                final=final,
                report=report,
            )
        )
        logger.info(
            f"Fold {f.fold}: accuracy {report.accuracy:.2f}%, precision {report.precision:.3f}, "
            f"recall {report.recall:.3f}, RMSE {report.rmse:.4f} mm"
        )

    return HurdleRun(
        site_id=table.site_id,
        fold_plan=plan,
        classify=classify,
        regress=regress,
        folds=tuple(results),
        average=average_folds([r.report for r in results]),
        timestamps=table.timestamps,
        truth=np.array(table.target),
        predictions=predictions,
        config=config.snapshot(),
        row_sites=table.row_sites,
        models=models,
    )


def reassemble(class_pred: np.ndarray, regressed: Optional[np.ndarray]) -> np.ndarray:
    """
    Final amplitudes: 0 where the class is 0, the clipped regressed value where it is 1.

    Args:
        class_pred: Hard labels of the test rows
        regressed: Regressed amplitudes of the class-1 rows, in order (None if there are none)
    """
    class_pred = np.asarray(class_pred)
    final = np.zeros(len(class_pred))
    rain = np.flatnonzero(class_pred == 1)
    if rain.size:
        if regressed is None or len(regressed) != rain.size:
            raise DataError(f"{rain.size} class-1 positions but {0 if regressed is None else len(regressed)} amplitudes")
        final[rain] = np.maximum(np.asarray(regressed, dtype=float), 0.0)
    return final


def run_regional(
    tables: Sequence[SeriesTable],
    spec: RegionSpec,
    store: TunedStore,
    config: HurdleConfig,
    fold_plan: Optional[FoldPlan] = None,
) -> Tuple[HurdleRun, Dict[str, HurdleRun]]:
    """
    Pool a region, run once, and split the predictions by site.

    Returns:
        (pooled run, per-site runs keyed by site id)
    """
    pooled = pool_region(tables, spec)
    run = run_hurdle(pooled, store, config, fold_plan=fold_plan, store_key=spec.name)
    per_site = {site: run.for_site(site) for site in spec.member_sites}
    for site, site_run in per_site.items():
        stat = site_run.average["rmse"]
        logger.info(f"Region {spec.name}, site {site}: mean RMSE {stat.mean:.4f} mm over {len(site_run.folds)} folds")
    return run, per_site
