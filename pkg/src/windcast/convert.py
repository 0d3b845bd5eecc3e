"""Converters from upstream data exports to the canonical CSV layout.

Canonical layout: header ``timestamp,<city>_<feature>,...`` with ISO-8601
UTC timestamps, one row per hour, decimal point ``.``. Already-canonical
input passes through byte-identical.

Supported upstream layouts:

* KNMI hourly export (Netherlands): station-per-row text with a commented
  header naming the columns. Column mapping (source units are kept):
  DD -> wind_direction, FH -> wind_speed (0.1 m/s), T -> temperature
  (0.1 degC), TD -> dew_point (0.1 degC), P -> air_pressure (0.1 hPa),
  RH -> rain_amount (0.1 mm; -1 meaning "trace" becomes 0). The hour field
  HH counts 1..24 for the interval ending at HH:00, so the canonical
  timestamp is date + (HH-1) hours.
* Denmark archive: either one wide CSV using recognizable aliases for the
  city/feature columns, or a directory with one CSV per city (file name =
  city). Alias tables below document the accepted spellings.
"""

from __future__ import annotations

import io
import os
from typing import Dict, Optional

import numpy as np
import pandas as pd

from .data import DatasetSchema

KNMI_STATIONS = {
    "240": "Schiphol",
    "260": "De_Bilt",
    "270": "Leeuwarden",
    "280": "Eelde",
    "344": "Rotterdam",
    "370": "Eindhoven",
    "380": "Maastricht",
}

KNMI_FEATURES = {  # canonical feature -> KNMI column
    "wind_speed": "FH",
    "wind_direction": "DD",
    "temperature": "T",
    "dew_point": "TD",
    "air_pressure": "P",
    "rain_amount": "RH",
}

TIME_ALIASES = ("timestamp", "time", "datetime", "date", "dt", "utc")

FEATURE_ALIASES = {
    "temperature": ("temperature", "temp", "t"),
    "pressure": ("pressure", "press", "p", "air_pressure"),
    "wind_speed": ("wind_speed", "windspeed", "wind_spd", "ws", "speed"),
    "wind_direction": ("wind_direction", "winddirection", "wind_dir", "wd", "direction"),
    "dew_point": ("dew_point", "dewpoint", "dew", "td"),
    "air_pressure": ("air_pressure", "pressure", "press", "p"),
    "rain_amount": ("rain_amount", "rain", "precipitation", "precip", "rh"),
}


class ConversionError(ValueError):
    """Upstream file does not match any supported layout."""


def is_canonical(path, schema: DatasetSchema) -> bool:
    """True when the file already has exactly the canonical columns."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
    except (OSError, UnicodeDecodeError):
        return False
    columns = [c.strip() for c in header.split(",")]
    return columns[:1] == ["timestamp"] and sorted(columns[1:]) == sorted(schema.columns())


def _passthrough(path, out_path) -> dict:
    with open(path, "rb") as src:
        blob = src.read()
    with open(out_path, "wb") as dst:
        dst.write(blob)
    rows = blob.count(b"\n") - 1
    return {"layout": "canonical", "rows": max(rows, 0), "empty_cells": 0}


def _write_canonical(frame: pd.DataFrame, schema: DatasetSchema, out_path) -> dict:
    """Write a (timestamp-indexed, canonical-column) frame; empties stay empty."""
    frame = frame.reindex(columns=schema.columns())
    frame = frame.sort_index()
    out = frame.copy()
    out.insert(0, "timestamp", [ts.strftime("%Y-%m-%dT%H:%M:%SZ") for ts in frame.index])
    buf = io.StringIO()
    out.to_csv(buf, index=False, lineterminator="\n")
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    empty = int(frame.isna().values.sum())
    return {"rows": len(frame), "empty_cells": empty}


# -- KNMI ----------------------------------------------------------------------


def convert_knmi(path, schema: DatasetSchema, out_path) -> dict:
    """Convert a KNMI hourly export into the canonical layout."""
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        lines = fh.readlines()

    header_cols: Optional[list] = None
    data_start = 0
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body.upper().startswith("STN"):
                header_cols = [c.strip().upper() for c in body.split(",")]
            data_start = i + 1
        elif header_cols is None and stripped.upper().startswith("STN"):
            header_cols = [c.strip().upper() for c in stripped.split(",")]
            data_start = i + 1
            break
        elif stripped:
            break
    if header_cols is None:
        raise ConversionError(f"{path}: no KNMI header line (expected a 'STN,...' column list)")

    required = ["STN", "YYYYMMDD", "HH"] + [KNMI_FEATURES[f] for f in schema.features]
    missing = [c for c in required if c not in header_cols]
    if missing:
        raise ConversionError(f"{path}: KNMI header is missing column {missing[0]!r}")

    body = "".join(line for line in lines[data_start:] if line.strip() and not line.startswith("#"))
    if not body:
        raise ConversionError(f"{path}: no data rows")
    frame = pd.read_csv(io.StringIO(body), header=None, names=header_cols,
                        skipinitialspace=True, dtype=str)

    stations = frame["STN"].str.strip()
    unknown = sorted(set(stations) - set(KNMI_STATIONS))
    if unknown:
        raise ConversionError(f"{path}: unknown station code {unknown[0]!r}")

    hours = pd.to_numeric(frame["HH"], errors="coerce")
    dates = pd.to_datetime(frame["YYYYMMDD"].str.strip(), format="%Y%m%d", errors="coerce")
    if dates.isna().any() or hours.isna().any():
        row = int(np.flatnonzero(dates.isna() | hours.isna())[0])
        raise ConversionError(f"{path}: unparsable date/hour at data row {row}")
    stamps = dates + pd.to_timedelta(hours - 1, unit="h")

    columns: Dict[str, pd.Series] = {}
    for feature in schema.features:
        values = pd.to_numeric(frame[KNMI_FEATURES[feature]], errors="coerce")
        if feature == "rain_amount":
            values = values.where(values != -1, 0.0)  # -1 encodes a trace amount
        columns[feature] = values

    wide = pd.DataFrame({"city": stations.map(KNMI_STATIONS), "timestamp": stamps, **columns})
    pivoted = wide.pivot_table(index="timestamp", columns="city",
                               values=list(schema.features), aggfunc="first")
    pivoted.columns = [f"{city}_{feature}" for feature, city in pivoted.columns]
    summary = _write_canonical(pivoted, schema, out_path)
    summary["layout"] = "knmi"
    summary["stations"] = sorted(set(stations))
    return summary


# -- Denmark -------------------------------------------------------------------


def _match_feature(column: str, features) -> Optional[str]:
    low = column.strip().lower()
    for feature in features:
        if low in FEATURE_ALIASES.get(feature, (feature,)):
            return feature
    return None


def _find_time_column(frame: pd.DataFrame):
    for col in frame.columns:
        if col.strip().lower() in TIME_ALIASES:
            return col
    return None


def _city_for_filename(name: str, schema: DatasetSchema) -> str:
    stem = os.path.splitext(os.path.basename(name))[0].lower()
    for city in schema.cities:
        if stem == city.lower():
            return city
    raise ConversionError(f"unknown city file {name!r} (expected one of {list(schema.cities)})")


def convert_city_directory(path, schema: DatasetSchema, out_path) -> dict:
    """Convert a directory of one-CSV-per-city files into the canonical layout."""
    files = sorted(f for f in os.listdir(path) if f.lower().endswith(".csv"))
    if not files:
        raise ConversionError(f"{path}: no CSV files in directory")
    merged = None
    for fname in files:
        city = _city_for_filename(fname, schema)
        frame = pd.read_csv(os.path.join(path, fname))
        time_col = _find_time_column(frame)
        if time_col is None:
            raise ConversionError(f"{fname}: no recognizable time column")
        renames = {}
        for col in frame.columns:
            if col == time_col:
                continue
            feature = _match_feature(col, schema.features)
            if feature is None:
                raise ConversionError(f"{fname}: unknown feature column {col!r}")
            renames[col] = f"{city}_{feature}"
        frame = frame.rename(columns=renames)
        frame.index = pd.to_datetime(frame[time_col], utc=True).dt.tz_localize(None)
        frame = frame.drop(columns=[time_col])
        merged = frame if merged is None else merged.join(frame, how="outer")
    missing = [c for c in schema.columns() if c not in merged.columns]
    if missing:
        raise ConversionError(f"{path}: converted data is missing column {missing[0]!r}")
    summary = _write_canonical(merged, schema, out_path)
    summary["layout"] = "city-directory"
    return summary


def convert_wide_aliases(path, schema: DatasetSchema, out_path) -> dict:
    """Convert a single wide CSV whose columns use ``<city>_<alias>`` names."""
    frame = pd.read_csv(path)
    time_col = _find_time_column(frame)
    if time_col is None:
        raise ConversionError(f"{path}: no recognizable time column")
    renames = {}
    for col in frame.columns:
        if col == time_col:
            continue
        matched = None
        for city in schema.cities:
            prefix = f"{city.lower()}_"
            if col.strip().lower().startswith(prefix):
                feature = _match_feature(col.strip()[len(prefix):], schema.features)
                if feature is not None:
                    matched = f"{city}_{feature}"
                break
        if matched is None:
            raise ConversionError(f"{path}: unknown column {col!r}")
        renames[col] = matched
    frame = frame.rename(columns=renames)
    frame.index = pd.to_datetime(frame[time_col], utc=True).dt.tz_localize(None)
    frame = frame.drop(columns=[time_col])
    summary = _write_canonical(frame, schema, out_path)
    summary["layout"] = "wide-aliases"
    return summary


def convert(path, schema: DatasetSchema, out_path) -> dict:
    """Map any supported layout to canonical; returns a conversion summary."""
    if os.path.isdir(path):
        return convert_city_directory(path, schema, out_path)
    if is_canonical(path, schema):
        return _passthrough(path, out_path)
    if schema.id == "netherlands":
        return convert_knmi(path, schema, out_path)
    return convert_wide_aliases(path, schema, out_path)
