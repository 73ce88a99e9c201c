"""
Synthetic multi-site precipitation datasets.

Rain occurrence follows a two-state Markov chain whose stationary wet fraction and
single-sample event fraction are configured; amplitudes are gamma distributed. Each
site gets its own ring of external gauges whose readings copy the site value with a
probability that decays with distance, and a set of weakly correlated station covariates.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from .const import (
    KIND_GAUGE,
    KIND_STATION,
    ORIGIN_GAUGE,
    ORIGIN_STATION,
    SAMPLE_MINUTES,
    TARGET_COLUMN,
    TIMESTAMP_COLUMN,
)
from .dataset import GaugeCatalog, GaugeEntry, SeriesTable, save_dataset
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

GAMMA_SHAPE = 0.7
SYNTH_START = "2020-01-01"
SAMPLES_PER_DAY = 24 * 60 // SAMPLE_MINUTES

# (column, mean, scale, loading on the smoothed rain state, smoothing factor)
COVARIATES = (
    ("pressure", 1010.0, 8.0, -0.12, 0.98),
    ("humidity", 80.0, 10.0, 0.14, 0.9),
    ("temperature", 10.0, 5.0, -0.08, 0.95),
    ("wind_speed", 4.0, 2.0, 0.10, 0.9),
    ("wind_direction", 180.0, 90.0, 0.02, 0.9),
    ("soil_moisture", 0.3, 0.08, 0.12, 0.995),
)


@dataclass(frozen=True)
class SynthConfig:
    n_sites: int = 2
    n_gauges: int = 6
    days: int = 30
    seed: int = 42
    rain_fraction: float = 0.10
    single_sample_fraction: float = 0.485
    mean_amplitude: float = 0.3
    correlation_length_m: float = 15000.0
    gauge_jitter: float = 0.25
    site_spacing_m: float = 100000.0
    missing_rate: float = 0.02
    target_missing_rate: float = 0.01
    missing_rates: Dict[str, float] = field(default_factory=dict)
    diurnal: bool = False

    def __post_init__(self) -> None:
        for name in ("n_sites", "n_gauges", "days"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("rain_fraction", "single_sample_fraction"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigError(f"{name} must be in (0, 1), got {value}")
        if self.mean_amplitude <= 0 or self.correlation_length_m <= 0:
            raise ConfigError("mean_amplitude and correlation_length_m must be > 0")
        rates = [self.missing_rate, self.target_missing_rate, *self.missing_rates.values()]
        if any(not 0 <= r < 1 for r in rates):
            raise ConfigError(f"missing rates must be in [0, 1), got {rates}")
        p01 = self.transition_probabilities[0]
        if not 0 < p01 < 1:
            raise ConfigError(
                f"rain fraction {self.rain_fraction} and single-sample fraction "
                f"{self.single_sample_fraction} give an infeasible dry-to-wet probability {p01:.4f}"
            )

    @property
    def transition_probabilities(self) -> Tuple[float, float]:
        """(p01, p11): dry-to-wet and wet-to-wet probabilities."""
        p11 = 1.0 - self.single_sample_fraction
        p01 = self.rain_fraction * (1.0 - p11) / (1.0 - self.rain_fraction)
        return p01, p11

    @property
    def n_samples(self) -> int:
        return self.days * SAMPLES_PER_DAY


@dataclass(frozen=True)
class SiteTruth:
    """Values of one site before missing cells were injected."""

    site_id: str
    target: np.ndarray
    features: np.ndarray
    feature_names: Tuple[str, ...]


@dataclass(frozen=True)
class SynthDataset:
    tables: List[SeriesTable]
    catalog: GaugeCatalog
    truth: Dict[str, SiteTruth]
    config: SynthConfig


@dataclass(frozen=True)
class OccurrenceStats:
    n_samples: int
    rain_fraction: float
    n_events: int
    single_sample_fraction: float
    mean_event_length: float


def occurrence_statistics(target: np.ndarray) -> OccurrenceStats:
    """
    Wet-sample fraction and event statistics of a precipitation series.

    An event is a maximal run of consecutive samples above 0. Missing samples are left
    out of the wet fraction and end any running event.
    """
    target = np.asarray(target, dtype=float)
    present = ~np.isnan(target)
    wet = np.zeros(len(target), dtype=np.int8)
    wet[present] = target[present] > 0
    edges = np.diff(np.concatenate([[0], wet, [0]]))
    lengths = np.flatnonzero(edges == -1) - np.flatnonzero(edges == 1)
    n_present = int(present.sum())
    return OccurrenceStats(
        n_samples=n_present,
        rain_fraction=float(wet.sum() / n_present) if n_present else 0.0,
        n_events=int(lengths.size),
        single_sample_fraction=float(np.mean(lengths == 1)) if lengths.size else 0.0,
        mean_event_length=float(lengths.mean()) if lengths.size else 0.0,
    )


def markov_occurrence(
    n: int,
    p01: float,
    p11: float,
    rng: np.random.Generator,
    modulation: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Wet/dry states of a two-state chain started from its stationary distribution."""
    draws = rng.random(n)
    entry = np.full(n, p01) if modulation is None else np.clip(p01 * modulation, 0.0, 1.0)
    states = np.zeros(n, dtype=bool)
    states[0] = draws[0] < p01 / (p01 + 1.0 - p11)
    for t in range(1, n):
        states[t] = draws[t] < (p11 if states[t - 1] else entry[t])
    return states


def rain_series(config: SynthConfig, rng: np.random.Generator, modulation: Optional[np.ndarray]) -> np.ndarray:
    p01, p11 = config.transition_probabilities
    wet = markov_occurrence(config.n_samples, p01, p11, rng, modulation)
    amounts = rng.gamma(GAMMA_SHAPE, config.mean_amplitude / GAMMA_SHAPE, size=config.n_samples)
    return np.where(wet, amounts, 0.0)


def _smooth(values: np.ndarray, factor: float) -> np.ndarray:
    return lfilter([1.0 - factor], [1.0, -factor], values)


def _standardize(values: np.ndarray) -> np.ndarray:
    sd = values.std()
    return (values - values.mean()) / sd if sd > 0 else values - values.mean()


def covariates(target: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Station covariates: weak smoothed responses to the wet state plus AR(1) noise."""
    wet = (target > 0).astype(float)
    columns = []
    for name, mean, scale, loading, factor in COVARIATES:
        signal = _standardize(_smooth(wet, factor))
        noise = _standardize(_smooth(rng.standard_normal(len(target)), 0.95))
        values = mean + scale * (loading * signal + noise)
        if name == "wind_direction":
            values = np.mod(values, 360.0)
        elif name == "humidity":
            values = np.clip(values, 0.0, 100.0)
        elif name in ("wind_speed", "soil_moisture"):
            values = np.maximum(values, 0.0)
        columns.append(values)
    return np.column_stack(columns)


def gauge_layout(n_gauges: int, rng: np.random.Generator) -> np.ndarray:
    """Offsets (m) of a site's gauges at distinct distances between 2 and 24 km."""
    if n_gauges == 1:
        distances = np.array([5000.0])
    else:
        distances = np.linspace(2000.0, 24000.0, n_gauges)
        spacing = distances[1] - distances[0]
        distances = distances + rng.uniform(-0.25, 0.25, n_gauges) * spacing
    angles = rng.uniform(0.0, 2.0 * np.pi, n_gauges)
    return np.column_stack([distances * np.cos(angles), distances * np.sin(angles)])


def gauge_readings(
    site_rain: np.ndarray,
    distance_m: float,
    config: SynthConfig,
    rng: np.random.Generator,
    modulation: Optional[np.ndarray],
) -> np.ndarray:
    """Per sample, copy the site value (jittered) with probability exp(-d / L), else read an independent series."""
    rho = float(np.exp(-distance_m / config.correlation_length_m))
    own = rain_series(config, rng, modulation)
    copy = rng.random(len(site_rain)) < rho
    sigma = config.gauge_jitter
    jitter = rng.lognormal(-0.5 * sigma**2, sigma, size=len(site_rain))
    return np.where(copy, site_rain * jitter, own)


def _mask(values: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
    masked = np.array(values, dtype=float)
    masked[rng.random(masked.shape) < rate] = np.nan
    return masked


def generate(config: SynthConfig) -> SynthDataset:
    """
    Generate sites, gauges and a truth record from one seeded stream.

    Args:
        config: Generator settings

    Returns:
        SynthDataset with one table per site (station covariates and gauge columns)
    """
    rng = np.random.default_rng(config.seed)
    timestamps = pd.date_range(SYNTH_START, periods=config.n_samples, freq=f"{SAMPLE_MINUTES}min", tz="UTC")
    modulation = None
    if config.diurnal:
        hours = timestamps.hour.to_numpy() + timestamps.minute.to_numpy() / 60.0
        modulation = 1.0 + 0.5 * np.sin(2.0 * np.pi * (hours - 9.0) / 24.0)

    entries: List[GaugeEntry] = []
    tables: List[SeriesTable] = []
    truth: Dict[str, SiteTruth] = {}
    station_names = tuple(name for name, *_ in COVARIATES)
    for s in range(config.n_sites):
        site_id = f"S{s + 1:02d}"
        origin = np.array([s * config.site_spacing_m, 0.0])
        entries.append(GaugeEntry(site_id, float(origin[0]), float(origin[1]), KIND_STATION))
        target = rain_series(config, rng, modulation)
        station = covariates(target, rng)

        offsets = gauge_layout(config.n_gauges, rng)
        gauge_ids = [f"{site_id}G{g + 1:02d}" for g in range(config.n_gauges)]
        gauges = []
        for gauge_id, offset in zip(gauge_ids, offsets):
            xy = origin + offset
            entries.append(GaugeEntry(gauge_id, float(xy[0]), float(xy[1]), KIND_GAUGE))
            gauges.append(gauge_readings(target, float(np.hypot(*offset)), config, rng, modulation))

        names = station_names + tuple(gauge_ids)
        features = np.column_stack([station, np.column_stack(gauges)])
        truth[site_id] = SiteTruth(site_id, target, features, names)
        rates = [config.missing_rates.get(n, config.missing_rate) for n in names]
        observed = np.column_stack([_mask(features[:, j], rate, rng) for j, rate in enumerate(rates)])
        tables.append(
            SeriesTable(
                site_id=site_id,
                timestamps=timestamps,
                target=_mask(target, config.target_missing_rate, rng),
                features=observed,
                feature_names=names,
                origins=(ORIGIN_STATION,) * len(station_names) + (ORIGIN_GAUGE,) * len(gauge_ids),
            )
        )
        stats = occurrence_statistics(target)
        logger.info(
            f"Site {site_id}: {config.n_samples} samples, wet fraction {stats.rain_fraction:.3f}, "
            f"single-sample events {stats.single_sample_fraction:.3f}"
        )
    return SynthDataset(tables, GaugeCatalog(tuple(entries)), truth, config)


def write_synthetic(dataset: SynthDataset, directory: Union[str, Path]) -> List[Path]:
    """
    Store a synthetic dataset in the canonical format, with the truth record under ``truth/``.

    Returns:
        Paths of the written site CSV files
    """
    directory = Path(directory)
    written = save_dataset(directory, dataset.tables, dataset.catalog)
    truth_dir = directory / "truth"
    os.makedirs(truth_dir, exist_ok=True)
    for table in dataset.tables:
        record = dataset.truth[table.site_id]
        frame = pd.DataFrame(record.features, columns=list(record.feature_names))
        frame.insert(0, TIMESTAMP_COLUMN, table.timestamps)
        frame[TARGET_COLUMN] = record.target
        frame.to_csv(truth_dir / f"{table.site_id}.csv", index=False, date_format="%Y-%m-%dT%H:%M:%SZ")
    with open(directory / "synth.json", "w", encoding="utf-8") as handle:
        json.dump({"config": asdict(dataset.config)}, handle, indent=2, sort_keys=True)
    logger.info(f"Wrote synthetic dataset of {len(dataset.tables)} sites to {directory}")
    return written
