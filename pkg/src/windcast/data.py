"""Ingestion, scaling, windowing, and chronological splits for weather CSVs.

The canonical on-disk form is a single CSV with an ISO-8601 UTC ``timestamp``
column followed by one ``<city>_<feature>`` column per station/measurement
pair. ``windcast convert`` produces this form from upstream exports.

Inputs to the models are min-max normalized; targets and persistence
predictions stay in the raw source units, so reported errors are directly
comparable across pipelines.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd


class IngestionError(ValueError):
    """Raw data file cannot be parsed into a WeatherTable."""


class ConfigurationError(ValueError):
    """Split ranges or schema settings are inconsistent."""


@dataclass(frozen=True)
class DatasetSchema:
    """Everything needed to turn a canonical CSV into experiment samples."""

    id: str
    cities: Tuple[str, ...]
    features: Tuple[str, ...]
    target_cities: Tuple[str, ...]
    window_steps: int
    horizons_hours: Tuple[int, ...]
    train_range: Tuple[str, str]          # half-open [start, end)
    test_range: Tuple[str, str]
    val_range: Optional[Tuple[str, str]] = None
    val_tail_fraction: float = 0.1        # used when val_range is None
    hours_per_step: float = 1.0

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return (len(self.cities), self.window_steps, len(self.features))

    @property
    def target_indices(self) -> Tuple[int, ...]:
        return tuple(self.cities.index(c) for c in self.target_cities)

    def columns(self) -> List[str]:
        return [f"{c}_{f}" for c in self.cities for f in self.features]

    def horizon_steps(self, horizon_hours: int) -> int:
        steps = horizon_hours / self.hours_per_step
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ConfigurationError(
                f"horizon {horizon_hours}h is not a positive multiple of "
                f"{self.hours_per_step}h steps"
            )
        return int(round(steps))


DENMARK = DatasetSchema(
    id="denmark",
    cities=("Aalborg", "Aarhus", "Esbjerg", "Odense", "Roskilde"),
    features=("temperature", "pressure", "wind_speed", "wind_direction"),
    target_cities=("Esbjerg", "Odense", "Roskilde"),
    window_steps=4,
    horizons_hours=(6, 12, 18, 24),
    train_range=("2000-01-01", "2009-01-01"),
    val_range=("2009-01-01", "2010-01-01"),
    test_range=("2010-01-01", "2011-01-01"),
)

NETHERLANDS = DatasetSchema(
    id="netherlands",
    cities=("Schiphol", "De_Bilt", "Leeuwarden", "Eelde", "Rotterdam",
            "Eindhoven", "Maastricht"),
    features=("wind_speed", "wind_direction", "temperature", "dew_point",
              "air_pressure", "rain_amount"),
    target_cities=("Schiphol", "De_Bilt", "Leeuwarden", "Eelde", "Rotterdam",
                   "Eindhoven", "Maastricht"),
    window_steps=6,
    horizons_hours=(1, 2, 3, 4),
    train_range=("2011-01-01", "2019-01-01"),
    val_range=None,
    test_range=("2019-01-01", "2020-04-01"),
)

SCHEMAS = {"denmark": DENMARK, "netherlands": NETHERLANDS}


@dataclass
class WeatherTable:
    """Hourly-cadence measurements: (time, city, feature) in raw units."""

    timestamps: np.ndarray              # datetime64[ns], strictly increasing
    values: np.ndarray                  # (N, C, F) float64, no missing values
    cities: Tuple[str, ...]
    features: Tuple[str, ...]
    filled_cells: int = 0
    inserted_rows: int = 0

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def n_station_rows(self) -> int:
        return len(self.timestamps) * len(self.cities)

    def row_range(self, start, end) -> Tuple[int, int]:
        """Half-open row index range covering timestamps in [start, end)."""
        lo = int(np.searchsorted(self.timestamps, np.datetime64(start)))
        hi = int(np.searchsorted(self.timestamps, np.datetime64(end)))
        return lo, hi


def load_csv(path, schema: DatasetSchema) -> WeatherTable:
    """Read a canonical CSV, enforce hourly cadence, and fill gaps.

    Rows are sorted by timestamp; missing cells and gap rows are forward-
    filled, with a back-fill pass for leading gaps. Fill counts are kept on
    the returned table for reporting.
    """
    try:
        frame = pd.read_csv(path, dtype=str)
    except pd.errors.EmptyDataError as exc:
        raise IngestionError(f"{path}: file is empty") from exc
    except OSError as exc:
        raise IngestionError(f"{path}: {exc}") from exc
    if frame.empty:
        raise IngestionError(f"{path}: no data rows")

    if "timestamp" not in frame.columns:
        raise IngestionError(f"{path}: missing 'timestamp' column")
    expected = schema.columns()
    unknown = [c for c in frame.columns if c != "timestamp" and c not in expected]
    if unknown:
        raise IngestionError(f"{path}: unknown column {unknown[0]!r}")
    missing = [c for c in expected if c not in frame.columns]
    if missing:
        raise IngestionError(f"{path}: missing column {missing[0]!r}")

    stamps = pd.to_datetime(frame["timestamp"], errors="coerce", utc=True)
    if stamps.isna().any():
        row = int(np.flatnonzero(stamps.isna())[0])
        raise IngestionError(
            f"{path}: unparsable timestamp {frame['timestamp'].iloc[row]!r} at data row {row}"
        )
    stamps = stamps.dt.tz_localize(None)

    numeric = frame[expected].apply(pd.to_numeric, errors="coerce")
    parsed = pd.DataFrame(numeric.values, index=stamps.values, columns=expected)
    parsed.sort_index(inplace=True)
    dup = parsed.index.duplicated()
    if dup.any():
        raise IngestionError(f"{path}: duplicate timestamp {parsed.index[dup][0]}")

    step = pd.Timedelta(hours=schema.hours_per_step)
    full_index = pd.date_range(parsed.index[0], parsed.index[-1], freq=step)
    off_grid = parsed.index.difference(full_index)
    if len(off_grid):
        raise IngestionError(f"{path}: timestamp {off_grid[0]} is not on the {step} grid")
    inserted = len(full_index) - len(parsed)
    parsed = parsed.reindex(full_index)

    filled = int(parsed.isna().values.sum())
    parsed = parsed.ffill().bfill()
    if parsed.isna().values.any():
        col = parsed.columns[int(np.flatnonzero(parsed.isna().any(axis=0))[0])]
        raise IngestionError(f"{path}: column {col!r} has no values at all")

    values = parsed.values.reshape(len(parsed), len(schema.cities), len(schema.features))
    return WeatherTable(
        timestamps=parsed.index.values,
        values=np.ascontiguousarray(values, dtype=np.float64),
        cities=schema.cities,
        features=schema.features,
        filled_cells=filled,
        inserted_rows=inserted,
    )


@dataclass
class MinMaxScaler:
    """Per-column affine normalizer fit on training rows only.

    Columns are (city, feature) pairs. Transform maps the training span to
    [0,1]; values outside the span map outside [0,1] by the same affine
    extension. Constant columns transform to 0 and are flagged.
    """

    minimum: np.ndarray                  # (C, F)
    maximum: np.ndarray                  # (C, F)

    @property
    def span(self) -> np.ndarray:
        return self.maximum - self.minimum

    @property
    def constant_columns(self) -> np.ndarray:
        return self.span == 0

    def transform(self, values: np.ndarray) -> np.ndarray:
        span = np.where(self.constant_columns, 1.0, self.span)
        out = (values - self.minimum) / span
        if self.constant_columns.any():
            out = np.where(self.constant_columns, 0.0, out)
        return out

    def inverse(self, values: np.ndarray) -> np.ndarray:
        """Exact inverse of transform for non-constant columns.

        The affine pullback y*span+min can land one rounding step away
        from the true preimage, so snap within the float neighborhood
        whenever that reproduces ``values`` under the forward map.
        """
        out = values * self.span + self.minimum
        miss = self.transform(out) != values
        if miss.any():
            for direction in (np.inf, -np.inf):
                cand = out.copy()
                for _ in range(2):
                    cand = np.nextafter(cand, direction)
                    fix = miss & (self.transform(cand) == values)
                    out = np.where(fix, cand, out)
                    miss &= ~fix
        return out


def fit_scaler(table: WeatherTable, train_range: Tuple[str, str]) -> MinMaxScaler:
    lo, hi = table.row_range(*train_range)
    if hi <= lo:
        raise ValueError(f"empty training range {train_range}")
    rows = table.values[lo:hi]
    return MinMaxScaler(minimum=rows.min(axis=0), maximum=rows.max(axis=0))


@dataclass
class SampleWindow:
    """One example: normalized (C,T,F) history plus a raw-unit target.

    ``last_wind_raw`` keeps the raw wind speed of every city at the anchor
    time so the persistence baseline never needs the scaler.
    """

    input: np.ndarray                    # (C, T, F) normalized
    target: np.ndarray                   # (n_targets,) raw units at t + horizon
    anchor: np.datetime64                # time t of the newest input row
    last_wind_raw: np.ndarray            # (C,) raw wind speed at t


def make_windows(table: WeatherTable, scaler: MinMaxScaler, steps: int,
                 horizon_steps: int, target_indices: Sequence[int],
                 row_range: Optional[Tuple[int, int]] = None) -> List[SampleWindow]:
    """Build every sample whose history and target fit inside the row range.

    For a contiguous range of N rows this yields N - (steps-1) - horizon_steps
    samples; a non-positive count raises ValueError.
    """
    if steps < 1 or horizon_steps < 1:
        raise ValueError("steps and horizon_steps must be >= 1")
    if "wind_speed" not in table.features:
        raise ValueError("table has no wind_speed feature")
    wind = table.features.index("wind_speed")

    lo, hi = row_range if row_range is not None else (0, table.n_rows)
    n = hi - lo
    count = n - (steps - 1) - horizon_steps
    if count < 1:
        raise ValueError(
            f"range of {n} rows is too short for {steps}-step windows at horizon "
            f"{horizon_steps} (would yield {count} samples)"
        )

    normalized = scaler.transform(table.values[lo:hi])
    targets = list(target_indices)
    samples = []
    for i in range(count):
        anchor = i + steps - 1
        window = normalized[i:i + steps]                      # (T, C, F)
        samples.append(SampleWindow(
            input=np.ascontiguousarray(window.transpose(1, 0, 2)),
            target=table.values[lo + anchor + horizon_steps, targets, wind].copy(),
            anchor=table.timestamps[lo + anchor],
            last_wind_raw=table.values[lo + anchor, :, wind].copy(),
        ))
    return samples


@dataclass
class HorizonSplits:
    horizon_hours: int
    horizon_steps: int
    train: List[SampleWindow]
    val: List[SampleWindow]
    test: List[SampleWindow]


@dataclass
class SplitResult:
    scaler: MinMaxScaler
    by_horizon: Dict[int, HorizonSplits] = field(default_factory=dict)


def _resolve_ranges(table: WeatherTable, schema: DatasetSchema):
    """Row-index boundaries for train/val/test; validation may be a train tail."""
    train_lo, train_hi = table.row_range(*schema.train_range)
    test_lo, test_hi = table.row_range(*schema.test_range)
    if schema.val_range is not None:
        val_lo, val_hi = table.row_range(*schema.val_range)
    else:
        tail = int(round((train_hi - train_lo) * schema.val_tail_fraction))
        if tail < 1:
            raise ConfigurationError("training range too short to carve a validation tail")
        val_lo, val_hi = train_hi - tail, train_hi
        train_hi = val_lo

    bounds = [("train", train_lo, train_hi), ("val", val_lo, val_hi), ("test", test_lo, test_hi)]
    for name, lo, hi in bounds:
        if hi <= lo:
            raise ConfigurationError(f"{name} range contains no rows")
    if not (train_hi <= val_lo and val_hi <= test_lo):
        raise ConfigurationError("ranges must be disjoint and chronological: train, validation, test")
    return (train_lo, train_hi), (val_lo, val_hi), (test_lo, test_hi)


def split(table: WeatherTable, schema: DatasetSchema) -> SplitResult:
    """Chronological, non-leaking train/validation/test samples per horizon.

    Windows are built inside each range independently, so no sample's input
    or target ever crosses a split boundary. The scaler sees training rows
    only (validation and test rows never touch its statistics).
    """
    train_rows, val_rows, test_rows = _resolve_ranges(table, schema)
    scaler = fit_scaler(table, (table.timestamps[train_rows[0]],
                                table.timestamps[train_rows[1] - 1] + np.timedelta64(1, "s")))
    result = SplitResult(scaler=scaler)
    for hours in schema.horizons_hours:
        steps = schema.horizon_steps(hours)
        result.by_horizon[hours] = HorizonSplits(
            horizon_hours=hours,
            horizon_steps=steps,
            train=make_windows(table, scaler, schema.window_steps, steps,
                               schema.target_indices, train_rows),
            val=make_windows(table, scaler, schema.window_steps, steps,
                             schema.target_indices, val_rows),
            test=make_windows(table, scaler, schema.window_steps, steps,
                              schema.target_indices, test_rows),
        )
    return result


def stack_samples(samples: Sequence[SampleWindow]):
    """(N,C,T,F) inputs and (N,targets) targets as contiguous arrays."""
    inputs = np.stack([s.input for s in samples])
    targets = np.stack([s.target for s in samples])
    return inputs, targets
