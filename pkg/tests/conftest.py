"""Shared fixtures: synthetic canonical datasets and real-data discovery."""

import os
from pathlib import Path

import numpy as np
import pytest

from windcast.data import DatasetSchema

# Small custom dataset used by pipeline/training/CLI tests. Three cities,
# three features, and a smooth + noisy wind process that a short history
# window genuinely predicts better than persistence does.
TEST_SCHEMA = DatasetSchema(
    id="testland",
    cities=("Alpha", "Beta", "Gamma"),
    features=("wind_speed", "temperature", "pressure"),
    target_cities=("Alpha", "Beta"),
    window_steps=4,
    horizons_hours=(2, 3),
    train_range=("2021-01-01", "2021-02-01"),
    val_range=("2021-02-01", "2021-02-08"),
    test_range=("2021-02-08", "2021-02-20"),
)


def synth_weather_frame(n_hours=1200, cities=TEST_SCHEMA.cities,
                        features=TEST_SCHEMA.features, seed=0,
                        start="2021-01-01"):
    """Hourly multi-city weather-ish series with a learnable diurnal cycle."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_hours)
    stamps = np.datetime64(start) + t.astype("timedelta64[h]")
    columns = {}
    for ci, city in enumerate(cities):
        phase = 2.0 * np.pi * ci / len(cities)
        daily = np.sin(2 * np.pi * t / 24.0 + phase)
        slow = np.sin(2 * np.pi * t / 240.0 + phase)
        noise = rng.normal(0, 0.25, size=n_hours)
        wind = 6.0 + 2.5 * daily + 1.5 * slow + noise
        for feature in features:
            if feature == "wind_speed":
                columns[f"{city}_{feature}"] = wind
            elif feature == "temperature":
                columns[f"{city}_{feature}"] = 10.0 + 8.0 * daily + rng.normal(0, 0.5, n_hours)
            else:
                columns[f"{city}_{feature}"] = 1000.0 + 5.0 * slow + rng.normal(0, 0.5, n_hours)
    return stamps, columns


def write_canonical_csv(path, stamps, columns):
    names = list(columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp," + ",".join(names) + "\n")
        for i, stamp in enumerate(stamps):
            iso = np.datetime_as_string(stamp, unit="s") + "Z"
            fh.write(iso + "," + ",".join(f"{columns[n][i]:.6f}" for n in names) + "\n")


@pytest.fixture(scope="session")
def synth_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "testland.csv"
    stamps, columns = synth_weather_frame()
    write_canonical_csv(path, stamps, columns)
    return path


@pytest.fixture(scope="session")
def synth_table(synth_csv):
    from windcast.data import load_csv
    return load_csv(synth_csv, TEST_SCHEMA)


def dataset_path(dataset_id: str):
    """Canonical CSV for a real dataset, if present (else None).

    Looked up under $WINDCAST_DATA or ./data as <dataset_id>.csv.
    """
    roots = []
    if os.environ.get("WINDCAST_DATA"):
        roots.append(Path(os.environ["WINDCAST_DATA"]))
    roots.append(Path(__file__).resolve().parent.parent / "data")
    for root in roots:
        candidate = root / f"{dataset_id}.csv"
        if candidate.exists():
            return candidate
    return None
