"""Constants for the raingap package."""

DOMAIN = "raingap"
VERSION = "1.0.0"

# Time lattice
SAMPLE_MINUTES = 30
GAUGE_MINUTES = 15

# Column names
TARGET_COLUMN = "precipitation"
TIMESTAMP_COLUMN = "timestamp"
SITE_COLUMN = "site_id"

# Column origins
ORIGIN_STATION = "station-sensor"
ORIGIN_GAUGE = "external-gauge"
ORIGIN_CYCLIC = "cyclic"
ORIGINS = (ORIGIN_STATION, ORIGIN_GAUGE, ORIGIN_CYCLIC)

# Catalog kinds
KIND_STATION = "station"
KIND_GAUGE = "external-gauge"

# Feature sets (CLI name -> internal name)
FEATURE_CORE = "core"
FEATURE_STATION = "all-station"
FEATURE_GAUGES = "external-gauges"
FEATURE_COMBINED = "station+gauges"
FEATURE_SETS = (FEATURE_CORE, FEATURE_STATION, FEATURE_GAUGES, FEATURE_COMBINED)
FEATURE_SET_ALIASES = {
    "core": FEATURE_CORE,
    "cosmos": FEATURE_STATION,
    "ea": FEATURE_GAUGES,
    "cosmos+ea": FEATURE_COMBINED,
}
DEFAULT_CORE_FEATURES = (
    "pressure",
    "humidity",
    "temperature",
    "wind_speed",
    "wind_direction",
)
CYCLIC_COLUMNS = ("hour_sin", "hour_cos", "month_sin", "month_cos")

# Ingestion defaults
DEFAULT_RADIUS_KM = 30.0
DEFAULT_MISSING_THRESHOLD = 0.10

# Cross validation
DEFAULT_FOLDS = 5
DEFAULT_SEED = 42
TUNING_TRAIN_FRACTION = 0.7
MIN_REGRESSION_ROWS = 20

# Learner families, in tie-break order
FAMILY_BOOSTING = "boosting"
FAMILY_FOREST = "forest"
FAMILY_KNN = "knn"
FAMILY_SVM = "svm"
FAMILY_NETWORK = "network"
FAMILY_ORDER = (FAMILY_BOOSTING, FAMILY_FOREST, FAMILY_KNN, FAMILY_SVM, FAMILY_NETWORK)

TASK_CLASSIFY = "classify"
TASK_REGRESS = "regress"
TASKS = (TASK_CLASSIFY, TASK_REGRESS)

# Hyperparameter grids; max_depth None means unlimited
FULL_GRIDS = {
    FAMILY_BOOSTING: {
        TASK_CLASSIFY: {
            "min_child_weight": [1, 5, 10],
            "subsample": [0.6, 1],
            "max_depth": [8, 12, 16],
        },
        TASK_REGRESS: {
            "min_child_weight": [1, 5, 10],
            "subsample": [0.6, 1],
            "max_depth": [8, 12, 16],
        },
    },
    FAMILY_KNN: {
        TASK_CLASSIFY: {
            "n_neighbours": [5, 7, 9],
            "leaf_size": [1, 3],
            "algorithm": ["auto", "kd-tree"],
        },
        TASK_REGRESS: {
            "n_neighbours": [5, 7, 9],
            "leaf_size": [1, 3],
            "algorithm": ["auto", "kd-tree"],
        },
    },
    FAMILY_FOREST: {
        TASK_CLASSIFY: {
            "max_depth": [None, 40, 80],
            "n_estimators": [100, 500, 1000],
            "min_samples_split": [2, 5],
            "min_samples_leaf": [1, 3],
        },
        TASK_REGRESS: {
            "max_depth": [None, 40, 80],
            "n_estimators": [100, 500, 1000],
            "min_samples_split": [2, 5],
            "min_samples_leaf": [1, 3],
        },
    },
    FAMILY_SVM: {
        TASK_CLASSIFY: {
            "C": [10, 100, 1000],
            "gamma": [0.0001, 0.001, 0.1, 1],
            "kernel": ["linear", "rbf"],
        },
        TASK_REGRESS: {
            "C": [10, 100, 1000],
            "gamma": [0.0001, 0.001, 0.1, 1],
            "kernel": ["linear", "rbf"],
        },
    },
    FAMILY_NETWORK: {
        TASK_CLASSIFY: {"hidden_layers": [2]},
        TASK_REGRESS: {"hidden_layers": [2, 8, 20]},
    },
}

DESK_GRIDS = {
    FAMILY_BOOSTING: {
        TASK_CLASSIFY: {"min_child_weight": [1], "subsample": [1], "max_depth": [8]},
        TASK_REGRESS: {"min_child_weight": [1], "subsample": [1], "max_depth": [8]},
    },
    FAMILY_KNN: {
        TASK_CLASSIFY: {"n_neighbours": [7], "leaf_size": [3], "algorithm": ["kd-tree"]},
        TASK_REGRESS: {"n_neighbours": [7], "leaf_size": [3], "algorithm": ["kd-tree"]},
    },
    FAMILY_FOREST: {
        TASK_CLASSIFY: {
            "max_depth": [40],
            "n_estimators": [100],
            "min_samples_split": [5],
            "min_samples_leaf": [3],
        },
        TASK_REGRESS: {
            "max_depth": [40],
            "n_estimators": [100],
            "min_samples_split": [5],
            "min_samples_leaf": [3],
        },
    },
    FAMILY_SVM: {
        TASK_CLASSIFY: {"C": [10], "gamma": [0.1], "kernel": ["rbf"]},
        TASK_REGRESS: {"C": [10], "gamma": [0.1], "kernel": ["rbf"]},
    },
    FAMILY_NETWORK: {
        TASK_CLASSIFY: {"hidden_layers": [2]},
        TASK_REGRESS: {"hidden_layers": [2]},
    },
}

FULL_GRID_VERSION = "full-1"
DESK_GRID_VERSION = "desk-1"

# Learner defaults not covered by the grids
DEFAULT_BOOSTING = {"learning_rate": 0.1, "n_rounds": 100, "reg_lambda": 0.0}
DEFAULT_NETWORK = {"width": 64, "epochs": 50, "batch_size": 256, "learning_rate": 1e-3}
DEFAULT_SVM = {"epsilon": 0.1, "tol": 1e-3, "max_train_rows": 20000, "max_iter": 1_000_000}
DEFAULT_KNN = {"weights": "uniform"}
# Bootstrap size per tree; None means the training size
DEFAULT_FOREST = {"max_samples": None}

# Imputer
DEFAULT_IMPUTER = {"max_rounds": 10, "n_estimators": 100, "tol": 1e-6, "max_samples": None}

# Surface fitting
DEFAULT_SURFACE = {"prune_threshold": 0.001, "max_candidates": 12}
PIVOT_TOLERANCE = 1e-12

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

# Environment variables
ENV_THREADS = "RAINGAP_THREADS"
ENV_SEED = "RAINGAP_SEED"
ENV_LOG_LEVEL = "RAINGAP_LOG_LEVEL"
ENV_OUTPUT_DIR = "RAINGAP_OUTPUT_DIR"

# Report metric keys
METRIC_KEYS = ("acc", "prec", "recall", "f1", "weighted_f1", "r2", "rmse")
