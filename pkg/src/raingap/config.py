"""
Configuration loading for raingap.

Settings are resolved from built-in defaults, then environment variables (optionally
read from a .env file), then a JSON config file. CLI flags are applied last by the
caller via :meth:`Settings.override`.
"""

import copy
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from .const import (
    DEFAULT_BOOSTING,
    DEFAULT_CORE_FEATURES,
    DEFAULT_FOLDS,
    DEFAULT_FOREST,
    DEFAULT_IMPUTER,
    DEFAULT_KNN,
    DEFAULT_NETWORK,
    DEFAULT_SEED,
    DEFAULT_SURFACE,
    DEFAULT_SVM,
    DESK_GRIDS,
    DESK_GRID_VERSION,
    ENV_LOG_LEVEL,
    ENV_OUTPUT_DIR,
    ENV_SEED,
    ENV_THREADS,
    FAMILY_ORDER,
    FULL_GRIDS,
    FULL_GRID_VERSION,
    TASKS,
)
from .exceptions import ConfigError
from .learners import PARAM_NAMES

logger = logging.getLogger(__name__)

SECTIONS = ("imputer", "boosting", "forest", "network", "svm", "knn", "surface")
SCALARS = ("threads", "seed", "folds", "core_features", "grids", "grid_version", "log_level", "output_dir")


@dataclass
class Settings:
    """Resolved configuration shared by every subcommand."""

    threads: int = 1
    seed: int = DEFAULT_SEED
    folds: int = DEFAULT_FOLDS
    log_level: str = "INFO"
    output_dir: str = "./data"
    core_features: List[str] = field(default_factory=lambda: list(DEFAULT_CORE_FEATURES))
    grids: Dict[str, Dict[str, Dict[str, list]]] = field(default_factory=lambda: copy.deepcopy(FULL_GRIDS))
    grid_version: str = FULL_GRID_VERSION
    imputer: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_IMPUTER))
    boosting: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_BOOSTING))
    forest: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_FOREST))
    network: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_NETWORK))
    svm: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_SVM))
    knn: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_KNN))
    surface: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULT_SURFACE))

    def update(self, values: Dict[str, Any]) -> None:
        """
        Merge a nested config mapping into these settings.

        Args:
            values: Mapping with section names or scalar keys at the top level

        Raises:
            ConfigError: On unknown keys
        """
        for key, value in values.items():
            if key in SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(f"config section '{key}' must be an object")
                section = getattr(self, key)
                for sub_key, sub_value in value.items():
                    if sub_key not in section:
                        raise ConfigError(f"unknown config key '{key}.{sub_key}'")
                    section[sub_key] = sub_value
            elif key == "grids":
                self.grids = _validate_grids(value)
            elif key in SCALARS:
                setattr(self, key, value)
            else:
                raise ConfigError(f"unknown config key '{key}'")
        if int(self.threads) < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        self.threads = int(self.threads)
        self.seed = int(self.seed)
        self.folds = int(self.folds)

    def override(self, **flags: Any) -> "Settings":
        """Apply CLI flags, ignoring the ones left unset."""
        self.update({k: v for k, v in flags.items() if v is not None})
        return self

    def snapshot(self) -> Dict[str, Any]:
        """Return a JSON-ready copy of the resolved settings."""
        return {
            "threads": self.threads,
            "seed": self.seed,
            "folds": self.folds,
            "core_features": list(self.core_features),
            "grid_version": self.grid_version,
            "grids": copy.deepcopy(self.grids),
            **{name: dict(getattr(self, name)) for name in SECTIONS},
        }


def _validate_grids(grids: Any) -> Dict[str, Dict[str, Dict[str, list]]]:
    if not isinstance(grids, dict):
        raise ConfigError("'grids' must be an object keyed by family")
    merged = copy.deepcopy(FULL_GRIDS)
    for family, by_task in grids.items():
        if family not in FAMILY_ORDER:
            raise ConfigError(f"unknown learner family '{family}' in grids")
        for task, grid in by_task.items():
            if task not in TASKS:
                raise ConfigError(f"unknown task '{task}' in grids.{family}")
            unknown = set(grid) - set(PARAM_NAMES[family])
            if unknown:
                raise ConfigError(f"unknown parameters {sorted(unknown)} in grids.{family}.{task}")
            for name, values in grid.items():
                if not isinstance(values, list) or not values:
                    raise ConfigError(f"grids.{family}.{task}.{name} must be a non-empty list")
            merged[family][task] = grid
    return merged


def load_grid(grid: str) -> Dict[str, Any]:
    """
    Resolve a --grid argument.

    Args:
        grid: 'full', 'desk' or a path to a JSON file with a 'grids' object

    Returns:
        Mapping with 'grids' and 'grid_version'
    """
    if grid == "full":
        return {"grids": copy.deepcopy(FULL_GRIDS), "grid_version": FULL_GRID_VERSION}
    if grid == "desk":
        return {"grids": copy.deepcopy(DESK_GRIDS), "grid_version": DESK_GRID_VERSION}
    path = Path(grid)
    if not path.exists():
        raise ConfigError(f"grid file not found: {grid}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as e:
        raise ConfigError(f"grid file {grid} is not valid JSON: {e}") from e
    return {
        "grids": _validate_grids(document.get("grids", {})),
        "grid_version": document.get("grid_version", path.stem),
    }


def load_settings(
    config_file: Optional[Union[str, Path]] = None,
    env_file: Optional[Union[str, Path]] = None,
) -> Settings:
    """
    Build settings from defaults, environment and an optional JSON file.

    Args:
        config_file: Path to a JSON config file
        env_file: Path to .env file. If None, loads from default location.

    Returns:
        Resolved settings
    """
    if env_file:
        load_dotenv(env_file)
    else:
        load_dotenv()

    settings = Settings()
    env_values: Dict[str, Any] = {}
    try:
        if os.getenv(ENV_THREADS):
            env_values["threads"] = int(os.getenv(ENV_THREADS, "1"))
        if os.getenv(ENV_SEED):
            env_values["seed"] = int(os.getenv(ENV_SEED, str(DEFAULT_SEED)))
    except ValueError as e:
        raise ConfigError(f"invalid integer in environment: {e}") from e
    env_values["log_level"] = os.getenv(ENV_LOG_LEVEL, settings.log_level).upper()
    env_values["output_dir"] = os.getenv(ENV_OUTPUT_DIR, settings.output_dir)
    settings.update(env_values)

    if config_file:
        path = Path(config_file)
        if not path.exists():
            raise ConfigError(f"config file not found: {config_file}")
        try:
            with open(path, "r", encoding="utf-8") as handle:
                document = json.load(handle)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {config_file} is not valid JSON: {e}") from e
        settings.update(document)
        logger.debug(f"Loaded config from {config_file}")

    return settings
