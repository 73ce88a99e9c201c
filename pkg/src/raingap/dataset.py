"""
Multi-station 30-minute records.

Holds the canonical in-memory table, the gauge catalog, and the ingestion steps:
15-minute gauge aggregation, radius selection, lattice alignment, sparse-column
dropping, regional pooling, and the CSV + JSON sidecar storage format.
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .const import (
    DEFAULT_CORE_FEATURES,
    DEFAULT_MISSING_THRESHOLD,
    DEFAULT_RADIUS_KM,
    FEATURE_CORE,
    FEATURE_COMBINED,
    FEATURE_GAUGES,
    FEATURE_SETS,
    FEATURE_SET_ALIASES,
    FEATURE_STATION,
    GAUGE_MINUTES,
    KIND_GAUGE,
    KIND_STATION,
    ORIGIN_CYCLIC,
    ORIGIN_GAUGE,
    ORIGIN_STATION,
    ORIGINS,
    SAMPLE_MINUTES,
    SITE_COLUMN,
    TARGET_COLUMN,
    TIMESTAMP_COLUMN,
)
from .exceptions import AlignmentError, ConfigError, DataError, PoolingError, UnknownSiteError

logger = logging.getLogger(__name__)

SAMPLE_STEP = pd.Timedelta(minutes=SAMPLE_MINUTES)
GAUGE_STEP = pd.Timedelta(minutes=GAUGE_MINUTES)


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.array(values, copy=True)
    values.setflags(write=False)
    return values


@dataclass(frozen=True)
class SeriesTable:
    """
    Aligned 30-minute samples of one site (or a pooled region).

    Missing cells are NaN. Pooled tables carry ``row_sites``; their timestamps are
    checked per site block instead of globally. Tables built by ``select_rows`` have
    ``lattice=False``: their timestamps only need to be strictly increasing.
    """

    site_id: str
    timestamps: pd.DatetimeIndex
    target: np.ndarray
    features: np.ndarray
    feature_names: Tuple[str, ...]
    origins: Tuple[str, ...]
    row_sites: Optional[np.ndarray] = None
    lattice: bool = True

    def __post_init__(self) -> None:
        timestamps = pd.DatetimeIndex(self.timestamps)
        if timestamps.tz is None:
            timestamps = timestamps.tz_localize("UTC")
        else:
            timestamps = timestamps.tz_convert("UTC")
        target = np.asarray(self.target, dtype=float).reshape(-1)
        features = np.asarray(self.features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(len(target), -1)
        names = tuple(str(name) for name in self.feature_names)
        origins = tuple(self.origins)

        if len(timestamps) != len(target) or features.shape[0] != len(target):
            raise DataError(
                f"table {self.site_id}: row counts differ "
                f"(timestamps={len(timestamps)}, target={len(target)}, features={features.shape[0]})"
            )
        if features.shape[1] != len(names) or len(origins) != len(names):
            raise DataError(f"table {self.site_id}: feature names/origins do not match the columns")
        if len(set(names)) != len(names):
            raise DataError(f"table {self.site_id}: duplicate feature column names")
        bad_origins = set(origins) - set(ORIGINS)
        if bad_origins:
            raise DataError(f"table {self.site_id}: unknown column origins {sorted(bad_origins)}")
        present = target[~np.isnan(target)]
        if present.size and present.min() < 0:
            raise DataError(f"table {self.site_id}: negative precipitation values")

        row_sites = None
        if self.row_sites is not None:
            row_sites = np.asarray(self.row_sites).astype(str)
            if len(row_sites) != len(target):
                raise DataError(f"table {self.site_id}: row_sites length mismatch")
            for site in pd.unique(row_sites):
                _check_spacing(timestamps[row_sites == site], site, self.lattice)
        else:
            _check_spacing(timestamps, self.site_id, self.lattice)

        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "target", _frozen(target))
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "origins", origins)
        object.__setattr__(self, "row_sites", None if row_sites is None else _frozen(row_sites))

    @property
    def n_rows(self) -> int:
        return len(self.target)

    @property
    def present_target(self) -> np.ndarray:
        return ~np.isnan(self.target)

    def column(self, name: str) -> np.ndarray:
        """Return a feature column by name."""
        try:
            return self.features[:, self.feature_names.index(name)]
        except ValueError:
            raise DataError(f"table {self.site_id}: no feature column '{name}'") from None

    def origin_of(self, name: str) -> str:
        return self.origins[self.feature_names.index(name)]

    def span(self) -> Tuple[pd.Timestamp, pd.Timestamp]:
        """First and last timestamp with a present target value."""
        present = np.flatnonzero(self.present_target)
        if present.size == 0:
            raise DataError(f"table {self.site_id}: no present precipitation values")
        return self.timestamps[present[0]], self.timestamps[present[-1]]

    def select_columns(self, names: Sequence[str]) -> "SeriesTable":
        """Return a table keeping only the named feature columns, in the given order."""
        indices = [self.feature_names.index(name) for name in names]
        return SeriesTable(
            site_id=self.site_id,
            timestamps=self.timestamps,
            target=self.target,
            features=self.features[:, indices],
            feature_names=tuple(self.feature_names[i] for i in indices),
            origins=tuple(self.origins[i] for i in indices),
            row_sites=self.row_sites,
            lattice=self.lattice,
        )

    def select_rows(self, rows: Union[np.ndarray, Sequence[int]]) -> "SeriesTable":
        """Return a table restricted to the given row mask or indices."""
        rows = np.asarray(rows)
        return SeriesTable(
            site_id=self.site_id,
            timestamps=self.timestamps[rows],
            target=self.target[rows],
            features=self.features[rows],
            feature_names=self.feature_names,
            origins=self.origins,
            row_sites=None if self.row_sites is None else self.row_sites[rows],
            lattice=False,
        )

    def with_columns(self, names: Sequence[str], values: np.ndarray, origin: str) -> "SeriesTable":
        """Return a table with extra feature columns appended."""
        values = np.asarray(values, dtype=float).reshape(self.n_rows, len(names))
        return SeriesTable(
            site_id=self.site_id,
            timestamps=self.timestamps,
            target=self.target,
            features=np.hstack([self.features, values]),
            feature_names=self.feature_names + tuple(names),
            origins=self.origins + (origin,) * len(names),
            row_sites=self.row_sites,
            lattice=self.lattice,
        )

    def to_frame(self) -> pd.DataFrame:
        """Return the table as a DataFrame with timestamp, features and target columns."""
        frame = pd.DataFrame(self.features, columns=list(self.feature_names))
        frame.insert(0, TIMESTAMP_COLUMN, self.timestamps)
        if self.row_sites is not None:
            frame.insert(1, SITE_COLUMN, self.row_sites)
        frame[TARGET_COLUMN] = self.target
        return frame

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        site_id: str,
        origins: Optional[Dict[str, str]] = None,
    ) -> "SeriesTable":
        """
        Build a table from a DataFrame with a timestamp and a precipitation column.

        Args:
            frame: Input frame; every other numeric column becomes a feature
            site_id: Identifier of the site
            origins: Column origin tags; untagged columns default to station-sensor

        Returns:
            SeriesTable
        """
        if TIMESTAMP_COLUMN not in frame.columns or TARGET_COLUMN not in frame.columns:
            raise DataError(f"table {site_id}: needs '{TIMESTAMP_COLUMN}' and '{TARGET_COLUMN}' columns")
        origins = origins or {}
        row_sites = frame[SITE_COLUMN].to_numpy() if SITE_COLUMN in frame.columns else None
        names = [c for c in frame.columns if c not in (TIMESTAMP_COLUMN, TARGET_COLUMN, SITE_COLUMN)]
        return cls(
            site_id=site_id,
            timestamps=pd.DatetimeIndex(pd.to_datetime(frame[TIMESTAMP_COLUMN], utc=True)),
            target=frame[TARGET_COLUMN].to_numpy(dtype=float),
            features=frame[names].to_numpy(dtype=float) if names else np.empty((len(frame), 0)),
            feature_names=tuple(names),
            origins=tuple(origins.get(name, ORIGIN_STATION) for name in names),
            row_sites=row_sites,
        )


def _check_spacing(timestamps: pd.DatetimeIndex, label: str, lattice: bool = True) -> None:
    if len(timestamps) < 2:
        return
    steps = np.diff(timestamps.asi8)
    if not lattice:
        if not np.all(steps > 0):
            bad = int(np.flatnonzero(steps <= 0)[0])
            raise DataError(f"table {label}: timestamps must be strictly increasing (break after {timestamps[bad]})")
        return
    if not np.all(steps == SAMPLE_STEP.value):
        bad = int(np.flatnonzero(steps != SAMPLE_STEP.value)[0])
        raise DataError(
            f"table {label}: timestamps must be strictly increasing at 30-minute spacing "
            f"(break after {timestamps[bad]})"
        )


@dataclass(frozen=True)
class GaugeEntry:
    gauge_id: str
    easting: float
    northing: float
    kind: str = KIND_GAUGE


@dataclass(frozen=True)
class GaugeCatalog:
    """Station and gauge identities with planar coordinates in metres."""

    entries: Tuple[GaugeEntry, ...]

    def __post_init__(self) -> None:
        ids = [entry.gauge_id for entry in self.entries]
        if len(set(ids)) != len(ids):
            raise DataError("gauge catalog: gauge ids must be unique")
        for entry in self.entries:
            if not (math.isfinite(entry.easting) and math.isfinite(entry.northing)):
                raise DataError(f"gauge catalog: non-finite coordinates for {entry.gauge_id}")
            if entry.kind not in (KIND_STATION, KIND_GAUGE):
                raise DataError(f"gauge catalog: unknown kind '{entry.kind}' for {entry.gauge_id}")

    def __contains__(self, gauge_id: object) -> bool:
        return any(entry.gauge_id == gauge_id for entry in self.entries)

    def entry(self, gauge_id: str) -> GaugeEntry:
        for entry in self.entries:
            if entry.gauge_id == gauge_id:
                return entry
        raise UnknownSiteError(f"'{gauge_id}' is not in the gauge catalog")

    def position(self, gauge_id: str) -> np.ndarray:
        entry = self.entry(gauge_id)
        return np.array([entry.easting, entry.northing], dtype=float)

    def positions(self, gauge_ids: Sequence[str]) -> np.ndarray:
        return np.array([self.position(g) for g in gauge_ids], dtype=float).reshape(-1, 2)

    def ids(self, kind: Optional[str] = None) -> List[str]:
        return [e.gauge_id for e in self.entries if kind is None or e.kind == kind]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.gauge_id, e.easting, e.northing, e.kind) for e in self.entries],
            columns=["gauge_id", "easting_m", "northing_m", "kind"],
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "GaugeCatalog":
        required = {"gauge_id", "easting_m", "northing_m", "kind"}
        missing = required - set(frame.columns)
        if missing:
            raise DataError(f"gauge catalog: missing columns {sorted(missing)}")
        return cls(
            tuple(
                GaugeEntry(str(row.gauge_id), float(row.easting_m), float(row.northing_m), str(row.kind))
                for row in frame.itertuples(index=False)
            )
        )

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "GaugeCatalog":
        return cls.from_frame(pd.read_csv(path, dtype={"gauge_id": str}))


@dataclass(frozen=True)
class IngestConfig:
    radius_km: float = DEFAULT_RADIUS_KM
    missing_threshold: float = DEFAULT_MISSING_THRESHOLD
    feature_set: str = FEATURE_COMBINED

    def __post_init__(self) -> None:
        if not 0 < self.missing_threshold < 1:
            raise ConfigError(f"missing_threshold must be in (0, 1), got {self.missing_threshold}")
        if not self.radius_km > 0:
            raise ConfigError(f"radius_km must be > 0, got {self.radius_km}")
        object.__setattr__(self, "feature_set", resolve_feature_set(self.feature_set))


@dataclass(frozen=True)
class RegionSpec:
    member_sites: Tuple[str, ...]
    pooled: bool = True
    name: str = ""

    def __post_init__(self) -> None:
        members = tuple(str(s) for s in self.member_sites)
        if len(members) < 2:
            raise ConfigError(f"a region needs at least 2 member sites, got {list(members)}")
        if len(set(members)) != len(members):
            raise ConfigError(f"region member sites must be distinct: {list(members)}")
        object.__setattr__(self, "member_sites", members)
        if not self.name:
            object.__setattr__(self, "name", "+".join(members))


def resolve_feature_set(name: str) -> str:
    """Map a CLI feature-set name (core, cosmos, ea, cosmos+ea) to its internal name."""
    resolved = FEATURE_SET_ALIASES.get(name, name)
    if resolved not in FEATURE_SETS:
        raise ConfigError(f"unknown feature set '{name}'")
    return resolved


def aggregate_gauge_15min(readings: pd.Series) -> pd.Series:
    """
    Sum 15-minute gauge totals into 30-minute totals.

    Pairs are (:15, :30) and (:45, :00); each output is stamped at the later reading
    and is missing if either reading is missing or absent.

    Args:
        readings: 15-minute totals indexed by UTC timestamps

    Returns:
        30-minute totals indexed by the half-hour marks

    Raises:
        AlignmentError: If a timestamp is off the quarter-hour lattice
    """
    index = pd.DatetimeIndex(pd.to_datetime(readings.index, utc=True))
    off_lattice = (index.minute % GAUGE_MINUTES != 0) | (index.second != 0) | (index.nanosecond != 0) | (
        index.microsecond != 0
    )
    if off_lattice.any():
        raise AlignmentError(index[np.flatnonzero(off_lattice)[0]])

    series = pd.Series(np.asarray(readings, dtype=float), index=index, name=readings.name)
    if series.empty:
        return series.iloc[0:0]
    series = series[~series.index.duplicated(keep="first")].sort_index()
    lattice = pd.date_range(series.index[0], series.index[-1], freq=GAUGE_STEP)
    series = series.reindex(lattice)

    paired = series + series.shift(1)
    half_hours = lattice.minute % SAMPLE_MINUTES == 0
    return paired[half_hours]


def select_gauges_in_radius(catalog: GaugeCatalog, site: str, radius_km: float) -> List[str]:
    """
    List external gauges within a radius of a site, nearest first.

    Args:
        catalog: Catalog holding the site and the gauges
        site: Site id
        radius_km: Search radius in kilometres

    Returns:
        Gauge ids ordered by (distance, gauge id)
    """
    origin = catalog.position(site)
    candidates = [e for e in catalog.entries if e.kind == KIND_GAUGE and e.gauge_id != site]
    if not candidates:
        return []
    xy = np.array([[e.easting, e.northing] for e in candidates], dtype=float)
    distances = np.hypot(xy[:, 0] - origin[0], xy[:, 1] - origin[1])
    radius_m = radius_km * 1000.0
    inside = [(d, e.gauge_id) for d, e in zip(distances, candidates) if d <= radius_m]
    return [gauge_id for _, gauge_id in sorted(inside)]


def _span_mask(table: SeriesTable) -> np.ndarray:
    present = np.flatnonzero(table.present_target)
    mask = np.zeros(table.n_rows, dtype=bool)
    if present.size:
        mask[present[0] : present[-1] + 1] = True
    return mask


def drop_sparse_columns(table: SeriesTable, threshold: float) -> SeriesTable:
    """
    Drop feature columns whose missing fraction over the site's span exceeds a threshold.

    Args:
        table: Input table
        threshold: Maximum allowed missing fraction, in (0, 1)

    Returns:
        Table with the sparse columns removed (the target is never dropped)
    """
    if not 0 < threshold < 1:
        raise ConfigError(f"missing threshold must be in (0, 1), got {threshold}")
    span = _span_mask(table)
    if not span.any() or table.features.shape[1] == 0:
        return table
    fractions = np.isnan(table.features[span]).mean(axis=0)
    keep = [name for name, frac in zip(table.feature_names, fractions) if frac <= threshold]
    dropped = [name for name, frac in zip(table.feature_names, fractions) if frac > threshold]
    if dropped:
        logger.info(f"Site {table.site_id}: dropped {len(dropped)} sparse columns: {', '.join(dropped)}")
    return table.select_columns(keep)


def pool_region(tables: Sequence[SeriesTable], spec: RegionSpec) -> SeriesTable:
    """
    Pool the tables of a region into one table.

    Keeps the feature columns common to every member, restricts rows to the window
    between the latest span start and the earliest span end, and tags each row with
    its site id.

    Raises:
        PoolingError: On an empty column intersection or an empty time overlap
    """
    if len(tables) < 2:
        raise PoolingError(f"region {spec.name}: pooling needs at least 2 tables")
    by_site = {t.site_id: t for t in tables}
    missing = [s for s in spec.member_sites if s not in by_site]
    if missing:
        raise PoolingError(f"region {spec.name}: no table for member sites {missing}")
    members = [by_site[s] for s in spec.member_sites]

    common = [n for n in members[0].feature_names if all(n in t.feature_names for t in members[1:])]
    if not common:
        raise PoolingError(f"region {spec.name}: member tables share no feature columns")
    for name in common:
        tags = {t.origin_of(name) for t in members}
        if len(tags) > 1:
            raise PoolingError(f"region {spec.name}: column '{name}' has conflicting origins {sorted(tags)}")

    spans = [t.span() for t in members]
    start = max(s for s, _ in spans)
    end = min(e for _, e in spans)
    if start > end:
        raise PoolingError(f"region {spec.name}: member spans do not overlap")

    parts = []
    for table in members:
        window = (table.timestamps >= start) & (table.timestamps <= end)
        parts.append(table.select_rows(window).select_columns(common))

    pooled = SeriesTable(
        site_id=spec.name,
        timestamps=parts[0].timestamps.append([p.timestamps for p in parts[1:]]),
        target=np.concatenate([p.target for p in parts]),
        features=np.vstack([p.features for p in parts]),
        feature_names=parts[0].feature_names,
        origins=parts[0].origins,
        row_sites=np.concatenate([np.full(p.n_rows, p.site_id) for p in parts]),
        lattice=all(t.lattice for t in members),
    )
    logger.info(
        f"Pooled region {spec.name}: {pooled.n_rows} rows, {len(common)} common columns, "
        f"window {start} .. {end}"
    )
    return pooled


def _read_timestamped_csv(source: Union[str, Path, pd.DataFrame]) -> pd.DataFrame:
    frame = source.copy() if isinstance(source, pd.DataFrame) else pd.read_csv(source)
    if TIMESTAMP_COLUMN not in frame.columns:
        raise DataError(f"input has no '{TIMESTAMP_COLUMN}' column")
    frame[TIMESTAMP_COLUMN] = pd.to_datetime(frame[TIMESTAMP_COLUMN], utc=True)
    return frame.set_index(TIMESTAMP_COLUMN).sort_index()


def build_site_table(
    site_frame: Union[str, Path, pd.DataFrame],
    gauge_frame: Optional[Union[str, Path, pd.DataFrame]],
    catalog: Optional[GaugeCatalog],
    site_id: str,
    config: IngestConfig,
    gauge_ids: Optional[Sequence[str]] = None,
) -> SeriesTable:
    """
    Build the canonical table of one site.

    Args:
        site_frame: 30-minute station records (CSV path or frame) with a precipitation column
        gauge_frame: 15-minute external gauge totals, one column per gauge id
        catalog: Catalog used to select gauges within the radius
        site_id: Site id
        config: Ingestion settings
        gauge_ids: Explicit gauge list overriding the radius selection

    Returns:
        SeriesTable on a complete 30-minute lattice with sparse columns dropped
    """
    station = _read_timestamped_csv(site_frame)
    if TARGET_COLUMN not in station.columns:
        raise DataError(f"site {site_id}: station records have no '{TARGET_COLUMN}' column")
    off_lattice = (station.index.minute % SAMPLE_MINUTES != 0) | (station.index.second != 0)
    if off_lattice.any():
        raise AlignmentError(station.index[np.flatnonzero(off_lattice)[0]], SAMPLE_MINUTES)
    station = station[~station.index.duplicated(keep="first")]
    lattice = pd.date_range(station.index[0], station.index[-1], freq=SAMPLE_STEP)
    station = station.reindex(lattice)
    origins = {name: ORIGIN_STATION for name in station.columns if name != TARGET_COLUMN}

    if gauge_frame is not None:
        gauges = _read_timestamped_csv(gauge_frame)
        if gauge_ids is None:
            if catalog is None:
                raise ConfigError("a gauge catalog is needed to select gauges by radius")
            gauge_ids = select_gauges_in_radius(catalog, site_id, config.radius_km)
        selected = [g for g in gauge_ids if g in gauges.columns]
        absent = [g for g in gauge_ids if g not in gauges.columns]
        if absent:
            logger.warning(f"Site {site_id}: no readings for gauges {', '.join(absent)}")
        for gauge_id in selected:
            if gauge_id in station.columns:
                raise DataError(f"site {site_id}: gauge id '{gauge_id}' clashes with a station column")
            station[gauge_id] = aggregate_gauge_15min(gauges[gauge_id]).reindex(lattice)
            origins[gauge_id] = ORIGIN_GAUGE
        logger.info(f"Site {site_id}: joined {len(selected)} external gauges within {config.radius_km} km")

    station.index.name = TIMESTAMP_COLUMN
    frame = station.reset_index()
    table = SeriesTable.from_frame(frame, site_id, origins)
    return drop_sparse_columns(table, config.missing_threshold)


def build_region_tables(
    site_frames: Dict[str, Union[str, Path, pd.DataFrame]],
    gauge_frame: Union[str, Path, pd.DataFrame],
    catalog: GaugeCatalog,
    spec: RegionSpec,
    config: IngestConfig,
) -> List[SeriesTable]:
    """Build member tables that share the union of every member's nearby gauges."""
    union: List[str] = []
    for site in spec.member_sites:
        for gauge_id in select_gauges_in_radius(catalog, site, config.radius_km):
            if gauge_id not in union:
                union.append(gauge_id)
    logger.info(f"Region {spec.name}: {len(union)} distinct gauges within {config.radius_km} km of a member")
    return [
        build_site_table(site_frames[site], gauge_frame, catalog, site, config, gauge_ids=union)
        for site in spec.member_sites
    ]


def select_feature_set(
    table: SeriesTable,
    feature_set: str,
    core_features: Iterable[str] = DEFAULT_CORE_FEATURES,
) -> SeriesTable:
    """
    Keep the columns of one feature-set variant.

    core keeps the named core station columns, all-station every station column,
    external-gauges every gauge column, station+gauges both. Cyclic columns are kept
    whenever present.
    """
    feature_set = resolve_feature_set(feature_set)
    core = set(core_features)
    keep = []
    for name, origin in zip(table.feature_names, table.origins):
        if origin == ORIGIN_CYCLIC:
            keep.append(name)
        elif feature_set == FEATURE_CORE and origin == ORIGIN_STATION and name in core:
            keep.append(name)
        elif feature_set == FEATURE_STATION and origin == ORIGIN_STATION:
            keep.append(name)
        elif feature_set == FEATURE_GAUGES and origin == ORIGIN_GAUGE:
            keep.append(name)
        elif feature_set == FEATURE_COMBINED and origin in (ORIGIN_STATION, ORIGIN_GAUGE):
            keep.append(name)
    return table.select_columns(keep)


def gauge_columns(table: SeriesTable) -> List[str]:
    return [n for n, o in zip(table.feature_names, table.origins) if o == ORIGIN_GAUGE]


def save_dataset(
    directory: Union[str, Path],
    tables: Sequence[SeriesTable],
    catalog: Optional[GaugeCatalog] = None,
    config: Optional[IngestConfig] = None,
) -> List[Path]:
    """
    Persist tables as one CSV per site plus a JSON sidecar.

    Returns:
        Paths of the written CSV files
    """
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    written = []
    for table in tables:
        csv_path = directory / f"{table.site_id}.csv"
        table.to_frame().to_csv(csv_path, index=False, date_format="%Y-%m-%dT%H:%M:%SZ")
        start, end = table.span() if table.present_target.any() else (None, None)
        sidecar = {
            "site_id": table.site_id,
            "target": TARGET_COLUMN,
            "origins": dict(zip(table.feature_names, table.origins)),
            "span": [None if start is None else start.isoformat(), None if end is None else end.isoformat()],
            "config": asdict(config) if config else None,
        }
        with open(directory / f"{table.site_id}.json", "w", encoding="utf-8") as handle:
            json.dump(sidecar, handle, indent=2, sort_keys=True)
        written.append(csv_path)
        logger.info(f"Saved {table.n_rows} rows for site {table.site_id} to {csv_path}")
    if catalog is not None:
        catalog.to_frame().to_csv(directory / "catalog.csv", index=False)
    return written


def load_dataset(directory: Union[str, Path]) -> Tuple[Dict[str, SeriesTable], Optional[GaugeCatalog]]:
    """
    Load every site stored by :func:`save_dataset`.

    Returns:
        (tables keyed by site id, catalog or None)
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"dataset directory not found: {directory}")
    tables: Dict[str, SeriesTable] = {}
    for sidecar_path in sorted(directory.glob("*.json")):
        with open(sidecar_path, "r", encoding="utf-8") as handle:
            sidecar = json.load(handle)
        if "site_id" not in sidecar:
            continue
        site_id = sidecar["site_id"]
        frame = pd.read_csv(directory / f"{site_id}.csv")
        tables[site_id] = SeriesTable.from_frame(frame, site_id, sidecar.get("origins", {}))
    if not tables:
        raise DataError(f"no site tables found in {directory}")
    catalog_path = directory / "catalog.csv"
    catalog = GaugeCatalog.from_csv(catalog_path) if catalog_path.exists() else None
    logger.info(f"Loaded {len(tables)} site tables from {directory}")
    return tables, catalog


def dataset_files(directory: Union[str, Path]) -> List[Path]:
    """Files that make up a stored dataset, for input digests."""
    directory = Path(directory)
    return sorted(p for p in directory.iterdir() if p.suffix in (".csv", ".json"))
