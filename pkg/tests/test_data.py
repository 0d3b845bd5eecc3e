"""Ingestion, scaling, windowing, and split tests on synthetic fixtures."""

import hashlib

import numpy as np
import pytest

from conftest import TEST_SCHEMA, synth_weather_frame, write_canonical_csv
from windcast.data import (
    ConfigurationError,
    DatasetSchema,
    IngestionError,
    MinMaxScaler,
    fit_scaler,
    load_csv,
    make_windows,
    split,
    stack_samples,
)

import dataclasses

TINY = DatasetSchema(
    id="tiny",
    cities=("A", "B"),
    features=("wind_speed", "temperature"),
    target_cities=("A",),
    window_steps=2,
    horizons_hours=(1,),
    train_range=("2022-01-01", "2022-01-02"),
    val_range=("2022-01-02", "2022-01-03"),
    test_range=("2022-01-03", "2022-01-04"),
)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


HEADER = "timestamp,A_wind_speed,A_temperature,B_wind_speed,B_temperature\n"


# -- load_csv ---------------------------------------------------------------------

def test_load_basic_and_shapes(tmp_path):
    path = _write(tmp_path, HEADER
                  + "2022-01-01T00:00:00Z,1,10,2,20\n"
                  + "2022-01-01T01:00:00Z,3,11,4,21\n")
    table = load_csv(path, TINY)
    assert table.n_rows == 2
    assert table.n_station_rows == 4
    assert table.values.shape == (2, 2, 2)
    assert table.values[1, 0, 0] == 3.0      # A wind at second hour
    assert table.values[0, 1, 1] == 20.0     # B temperature at first hour


def test_missing_cell_forward_filled_and_counted(tmp_path):
    path = _write(tmp_path, HEADER
                  + "2022-01-01T00:00:00Z,1,10,2,20\n"
                  + "2022-01-01T01:00:00Z,,11,4,21\n"
                  + "2022-01-01T02:00:00Z,5,12,6,22\n")
    table = load_csv(path, TINY)
    assert table.values[1, 0, 0] == 1.0  # previous row's wind value
    assert table.filled_cells == 1


def test_leading_gap_back_filled(tmp_path):
    path = _write(tmp_path, HEADER
                  + "2022-01-01T00:00:00Z,,10,2,20\n"
                  + "2022-01-01T01:00:00Z,7,11,4,21\n")
    table = load_csv(path, TINY)
    assert table.values[0, 0, 0] == 7.0
    assert table.filled_cells == 1


def test_out_of_order_rows_are_reordered(tmp_path):
    path = _write(tmp_path, HEADER
                  + "2022-01-01T01:00:00Z,3,11,4,21\n"
                  + "2022-01-01T00:00:00Z,1,10,2,20\n")
    table = load_csv(path, TINY)
    assert table.values[0, 0, 0] == 1.0
    assert table.timestamps[0] < table.timestamps[1]


def test_duplicate_timestamp_rejected(tmp_path):
    path = _write(tmp_path, HEADER
                  + "2022-01-01T00:00:00Z,1,10,2,20\n"
                  + "2022-01-01T00:00:00Z,3,11,4,21\n")
    with pytest.raises(IngestionError, match="duplicate"):
        load_csv(path, TINY)


def test_gap_rows_inserted_and_counted(tmp_path):
    path = _write(tmp_path, HEADER
                  + "2022-01-01T00:00:00Z,1,10,2,20\n"
                  + "2022-01-01T03:00:00Z,3,11,4,21\n")
    table = load_csv(path, TINY)
    assert table.n_rows == 4
    assert table.inserted_rows == 2
    assert table.filled_cells == 8  # two full rows of 4 columns
    assert np.array_equal(table.values[1], table.values[0])


def test_unknown_column_rejected(tmp_path):
    path = _write(tmp_path, "timestamp,A_wind_speed,A_temperature,B_wind_speed,B_temperature,C_bogus\n"
                  + "2022-01-01T00:00:00Z,1,10,2,20,0\n")
    with pytest.raises(IngestionError, match="C_bogus"):
        load_csv(path, TINY)


def test_missing_column_rejected(tmp_path):
    path = _write(tmp_path, "timestamp,A_wind_speed\n2022-01-01T00:00:00Z,1\n")
    with pytest.raises(IngestionError, match="A_temperature"):
        load_csv(path, TINY)


def test_unparsable_timestamp_names_row(tmp_path):
    path = _write(tmp_path, HEADER
                  + "2022-01-01T00:00:00Z,1,10,2,20\n"
                  + "not-a-time,3,11,4,21\n")
    with pytest.raises(IngestionError, match="not-a-time"):
        load_csv(path, TINY)


def test_empty_file_rejected(tmp_path):
    with pytest.raises(IngestionError):
        load_csv(_write(tmp_path, ""), TINY)
    with pytest.raises(IngestionError):
        load_csv(_write(tmp_path, HEADER), TINY)


def test_off_grid_timestamp_rejected(tmp_path):
    path = _write(tmp_path, HEADER
                  + "2022-01-01T00:00:00Z,1,10,2,20\n"
                  + "2022-01-01T00:30:00Z,3,11,4,21\n")
    with pytest.raises(IngestionError, match="grid"):
        load_csv(path, TINY)


# -- scaler -----------------------------------------------------------------------

def _scaler_from(values):
    arr = np.asarray(values, dtype=float).reshape(-1, 1, 1)
    return MinMaxScaler(minimum=arr.min(axis=0), maximum=arr.max(axis=0))


def test_scaler_midpoint():
    scaler = _scaler_from([0.0, 10.0])
    assert scaler.transform(np.array([[[5.0]]]))[0, 0, 0] == 0.5


def test_scaler_constant_column_maps_to_zero():
    scaler = _scaler_from([4.0, 4.0])
    assert scaler.transform(np.array([[[4.0]]]))[0, 0, 0] == 0.0
    assert scaler.constant_columns.all()


def test_scaler_extends_outside_unit_interval():
    scaler = _scaler_from([0.0, 10.0])
    assert scaler.transform(np.array([[[12.0]]]))[0, 0, 0] == pytest.approx(1.2)


def test_scaler_round_trip_exact(synth_table):
    scaler = fit_scaler(synth_table, TEST_SCHEMA.train_range)
    rows = synth_table.values[:100]
    back = scaler.inverse(scaler.transform(rows))
    assert np.array_equal(back, rows)  # all columns vary in the synthetic data


def test_fit_scaler_empty_range(synth_table):
    with pytest.raises(ValueError):
        fit_scaler(synth_table, ("1999-01-01", "1999-01-02"))


def test_scaler_training_rows_map_into_unit_interval(synth_table):
    scaler = fit_scaler(synth_table, TEST_SCHEMA.train_range)
    lo, hi = synth_table.row_range(*TEST_SCHEMA.train_range)
    normalized = scaler.transform(synth_table.values[lo:hi])
    assert normalized.min() >= 0.0 and normalized.max() <= 1.0


# -- windowing --------------------------------------------------------------------

def test_window_count_formula(synth_table):
    # N - (T-1) - delta, confirmed by direct enumeration: anchors run from
    # row T-1 through row N-1-delta inclusive
    scaler = fit_scaler(synth_table, TEST_SCHEMA.train_range)
    samples = make_windows(synth_table, scaler, 4, 6, (0, 1), (0, 100))
    assert len(samples) == 100 - (4 - 1) - 6
    anchors = [s.anchor for s in samples]
    assert anchors[0] == synth_table.timestamps[3]
    assert anchors[-1] == synth_table.timestamps[93]


@pytest.mark.parametrize("n,t,d", [(20, 1, 1), (20, 4, 6), (50, 6, 12), (15, 2, 3)])
def test_window_count_formula_grid(synth_table, n, t, d):
    scaler = fit_scaler(synth_table, TEST_SCHEMA.train_range)
    samples = make_windows(synth_table, scaler, t, d, (0,), (0, n))
    assert len(samples) == n - (t - 1) - d


def test_window_range_too_short_raises(synth_table):
    scaler = fit_scaler(synth_table, TEST_SCHEMA.train_range)
    with pytest.raises(ValueError):
        make_windows(synth_table, scaler, 6, 6, (0,), (0, 10))


def test_first_window_alignment(synth_table):
    # anchor is row T-1; target sits horizon rows later, in raw units
    scaler = fit_scaler(synth_table, TEST_SCHEMA.train_range)
    samples = make_windows(synth_table, scaler, 4, 6, (0, 1), (0, 50))
    first = samples[0]
    assert first.anchor == synth_table.timestamps[3]
    wind = synth_table.features.index("wind_speed")
    assert np.array_equal(first.target, synth_table.values[9, [0, 1], wind])
    assert np.array_equal(first.last_wind_raw, synth_table.values[3, :, wind])
    normalized = scaler.transform(synth_table.values[0:4])
    assert np.array_equal(first.input, normalized.transpose(1, 0, 2))


def test_window_shape_is_cities_steps_features(synth_table):
    scaler = fit_scaler(synth_table, TEST_SCHEMA.train_range)
    sample = make_windows(synth_table, scaler, 4, 2, (0,), (0, 30))[0]
    assert sample.input.shape == (3, 4, 3)


def test_windowing_determinism(synth_table):
    scaler = fit_scaler(synth_table, TEST_SCHEMA.train_range)

    def digest():
        samples = make_windows(synth_table, scaler, 4, 3, (0, 1), (0, 200))
        inputs, targets = stack_samples(samples)
        return hashlib.sha256(inputs.tobytes() + targets.tobytes()).hexdigest()

    assert digest() == digest()


# -- split ------------------------------------------------------------------------

def test_split_produces_all_horizons(synth_table):
    result = split(synth_table, TEST_SCHEMA)
    assert sorted(result.by_horizon) == sorted(TEST_SCHEMA.horizons_hours)
    for splits in result.by_horizon.values():
        assert len(splits.train) and len(splits.val) and len(splits.test)


def test_split_no_leakage(synth_table):
    result = split(synth_table, TEST_SCHEMA)
    test_start = np.datetime64(TEST_SCHEMA.test_range[0])
    val_start = np.datetime64(TEST_SCHEMA.val_range[0])
    for splits in result.by_horizon.values():
        assert max(s.anchor for s in splits.train) < val_start
        assert max(s.anchor for s in splits.val) < test_start
        assert min(s.anchor for s in splits.test) >= test_start
        # inputs never reach back before the range start either
        steps = TEST_SCHEMA.window_steps
        first_test = min(s.anchor for s in splits.test)
        assert first_test - np.timedelta64(steps - 1, "h") >= test_start


def test_split_scaler_ignores_val_and_test_rows(synth_table):
    result = split(synth_table, TEST_SCHEMA)
    lo, hi = synth_table.row_range(*TEST_SCHEMA.train_range)
    train_rows = synth_table.values[lo:hi]
    assert np.array_equal(result.scaler.minimum, train_rows.min(axis=0))
    assert np.array_equal(result.scaler.maximum, train_rows.max(axis=0))


def test_split_validation_tail_when_no_val_range(synth_table):
    schema = dataclasses.replace(TEST_SCHEMA, val_range=None, val_tail_fraction=0.1)
    result = split(synth_table, schema)
    h = schema.horizons_hours[0]
    splits = result.by_horizon[h]
    # validation anchors sit after every training anchor and before the test range
    assert max(s.anchor for s in splits.train) < min(s.anchor for s in splits.val)
    assert max(s.anchor for s in splits.val) < np.datetime64(schema.test_range[0])


def test_split_rejects_overlapping_ranges(synth_table):
    schema = dataclasses.replace(
        TEST_SCHEMA,
        val_range=("2021-01-20", "2021-02-10"),  # overlaps the train range
    )
    with pytest.raises(ConfigurationError):
        split(synth_table, schema)


def test_split_rejects_inverted_ranges(synth_table):
    schema = dataclasses.replace(
        TEST_SCHEMA,
        train_range=("2021-02-08", "2021-02-20"),
        val_range=("2021-02-01", "2021-02-08"),
        test_range=("2021-01-01", "2021-02-01"),
    )
    with pytest.raises(ConfigurationError):
        split(synth_table, schema)


def test_split_rejects_empty_range(synth_table):
    schema = dataclasses.replace(TEST_SCHEMA, test_range=("2025-01-01", "2025-02-01"))
    with pytest.raises(ConfigurationError):
        split(synth_table, schema)


def test_horizon_steps_respects_step_ratio():
    schema = dataclasses.replace(TEST_SCHEMA, hours_per_step=6.0)
    assert schema.horizon_steps(6) == 1
    assert schema.horizon_steps(24) == 4
    with pytest.raises(ConfigurationError):
        schema.horizon_steps(4)


def test_ingestion_summary_counts(tmp_path):
    stamps, columns = synth_weather_frame(n_hours=100)
    path = tmp_path / "x.csv"
    write_canonical_csv(path, stamps, columns)
    table = load_csv(path, TEST_SCHEMA)
    assert table.n_rows == 100
    assert table.n_station_rows == 300
    assert table.filled_cells == 0
