"""Command-line entry point: convert, train, evaluate, repro.

Exit codes: 0 success, 1 reproduction-criteria failure, 2 usage/config/data
error, 3 training divergence. ``WINDCAST_THREADS`` caps how many independent
(model, horizon, seed) runs execute concurrently; each run is internally
single-threaded and fully seeded.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import os
import statistics
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import convert as convert_mod
from . import reference
from .autodiff import Tensor
from .convert import ConversionError
from .data import (
    SCHEMAS,
    ConfigurationError,
    DatasetSchema,
    IngestionError,
    fit_scaler,
    load_csv,
    make_windows,
    split,
)
from .models import (
    MODEL_KINDS,
    PersistenceBaseline,
    build_model,
    count_parameters,
    expected_parameter_count,
)
from .reporting import (
    content_digest,
    dump_predictions,
    evaluate,
    emit_report,
    reports_to_markdown,
)
from .training import DivergenceError, TrainConfig, fit
from .weights import FormatError, load_weights_file, save_weights_file

TRAINABLE_KINDS = tuple(k for k in MODEL_KINDS if k != "persistence")
SHORT_ID = {"denmark": "dk", "netherlands": "nl"}
MARKDOWN_DECIMALS = {"denmark": 3, "netherlands": 2}


def _short_id(schema: DatasetSchema) -> str:
    return SHORT_ID.get(schema.id, schema.id)


def run_name(kind: str, schema: DatasetSchema, horizon: int, seed: int) -> str:
    return f"{kind}_{_short_id(schema)}_h{horizon}_s{seed}"


def _read_config(path):
    parser = configparser.ConfigParser()
    if path:
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"config file {path!r} not found")
    return parser


def _csv_list(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def _schema_from_config(section) -> DatasetSchema:
    try:
        val_range = None
        if section.get("val_start"):
            val_range = (section["val_start"], section["val_end"])
        return DatasetSchema(
            id=section.get("id", "custom"),
            cities=tuple(_csv_list(section["cities"])),
            features=tuple(_csv_list(section["features"])),
            target_cities=tuple(_csv_list(section["target_cities"])),
            window_steps=section.getint("window_steps"),
            horizons_hours=tuple(int(h) for h in _csv_list(section["horizons"])),
            train_range=(section["train_start"], section["train_end"]),
            test_range=(section["test_start"], section["test_end"]),
            val_range=val_range,
            val_tail_fraction=section.getfloat("val_tail_fraction", 0.1),
            hours_per_step=section.getfloat("hours_per_step", 1.0),
        )
    except (KeyError, configparser.NoOptionError) as exc:
        raise ConfigurationError(f"custom dataset config is missing {exc}") from exc


def resolve_schema(args, config) -> DatasetSchema:
    dataset = getattr(args, "dataset", None)
    if dataset is None and config.has_section("dataset"):
        dataset = config["dataset"].get("schema")
    if dataset is None:
        raise ConfigurationError("no dataset given (use --dataset or a config file)")
    if dataset in SCHEMAS:
        schema = SCHEMAS[dataset]
    elif dataset == "custom":
        if not config.has_section("dataset"):
            raise ConfigurationError("--dataset custom requires a config file with a [dataset] section")
        schema = _schema_from_config(config["dataset"])
    else:
        raise ConfigurationError(f"unknown dataset {dataset!r} (denmark, netherlands, or custom)")
    horizons = getattr(args, "horizons", None)
    if horizons:
        schema = dataclasses.replace(schema, horizons_hours=tuple(int(h) for h in _csv_list(horizons)))
    return schema


def resolve_train_config(args, config, seed: int) -> TrainConfig:
    section = config["train"] if config.has_section("train") else {}

    def pick(flag, key, cast, default):
        value = getattr(args, flag, None)
        if value is not None:
            return value
        if key in section:
            return cast(section[key])
        return default

    return TrainConfig(
        max_epochs=pick("epochs", "max_epochs", int, 150),
        batch_size=pick("batch_size", "batch_size", int, 64),
        learning_rate=pick("learning_rate", "learning_rate", float, 0.001),
        patience=pick("patience", "patience", int, 20),
        seed=seed,
    )


def resolve_seeds(args, config, default=(42,)):
    if getattr(args, "seeds", None):
        return [int(s) for s in _csv_list(args.seeds)]
    if config.has_section("train") and config["train"].get("seeds"):
        return [int(s) for s in _csv_list(config["train"]["seeds"])]
    return list(default)


def resolve_models(args, config):
    requested = getattr(args, "models", None)
    if requested:
        kinds = _csv_list(requested)
    elif config.has_section("models") and config["models"].get("kinds"):
        kinds = _csv_list(config["models"]["kinds"])
    else:
        kinds = list(TRAINABLE_KINDS)
    for kind in kinds:
        if kind not in MODEL_KINDS:
            raise ConfigurationError(f"unknown model kind {kind!r}")
    return kinds


def _model_kwargs(config, kind: str) -> dict:
    section_name = f"model.{kind}"
    if not config.has_section(section_name):
        return {}
    section = config[section_name]
    kwargs = {}
    if section.get("feature_maps"):
        kwargs["feature_maps"] = section.getint("feature_maps")
    if section.get("hidden_units"):
        kwargs["hidden_units"] = section.getint("hidden_units")
    return kwargs


def _max_workers() -> int:
    raw = os.environ.get("WINDCAST_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# -- convert -------------------------------------------------------------------


def cmd_convert(args) -> int:
    config = _read_config(args.config)
    schema = resolve_schema(args, config)
    out = args.out or f"{schema.id}.csv"
    summary = convert_mod.convert(args.input, schema, out)
    print(f"converted {args.input} -> {out}")
    print(f"  layout: {summary['layout']}, rows: {summary['rows']}, "
          f"empty cells: {summary['empty_cells']}")
    return 0


# -- train ---------------------------------------------------------------------


def _train_one(kind, schema, splits_for_horizon, horizon, seed, train_config,
               model_kwargs, out_dir):
    model = build_model(kind, schema.input_shape, len(schema.target_indices),
                        seed=seed, **model_kwargs)
    trace = fit(model, splits_for_horizon.train, splits_for_horizon.val, train_config)
    name = run_name(kind, schema, horizon, seed)
    save_weights_file(model, Path(out_dir) / f"{name}.wndc")
    with open(Path(out_dir) / f"{name}.trace.jsonl", "w", encoding="utf-8") as fh:
        fh.write(trace.to_jsonl())
    return name, trace


def cmd_train(args) -> int:
    config = _read_config(args.config)
    schema = resolve_schema(args, config)
    kinds = [k for k in resolve_models(args, config) if k != "persistence"]
    seeds = resolve_seeds(args, config)
    out_dir = Path(args.out or "runs")
    out_dir.mkdir(parents=True, exist_ok=True)

    table = load_csv(args.data, schema)
    print(f"loaded {args.data}: {table.n_rows} timestamps "
          f"({table.n_station_rows} station-rows), filled {table.filled_cells} cells, "
          f"inserted {table.inserted_rows} gap rows")
    splits = split(table, schema)

    jobs = [(kind, horizon, seed)
            for kind in kinds for horizon in schema.horizons_hours for seed in seeds]

    def run(job):
        kind, horizon, seed = job
        tc = resolve_train_config(args, config, seed)
        return _train_one(kind, schema, splits.by_horizon[horizon], horizon, seed,
                          tc, _model_kwargs(config, kind), out_dir)

    workers = _max_workers()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    for name, trace in results:
        print(f"  {name}: epochs={trace.epochs_run} best_epoch={trace.best_epoch} "
              f"best_val={trace.best_val_loss:.6g} time={trace.wall_time_s:.1f}s")
    return 0


# -- evaluate ------------------------------------------------------------------


def _evaluate_grid(args, config, schema, table, kinds, seeds, weights_dir):
    splits = split(table, schema)
    with open(args.data, "rb") as fh:
        digest = content_digest(fh.read())
    target_names = list(schema.target_cities)
    reports = []
    prediction_files = {}

    for horizon in schema.horizons_hours:
        test = splits.by_horizon[horizon].test
        baseline = PersistenceBaseline(schema.input_shape, schema.target_indices)
        reports.append(evaluate(baseline, test, schema.id, horizon, target_names,
                                filled_cells=table.filled_cells, config_digest=digest))
        if args.dump_predictions:
            name = run_name("persistence", schema, horizon, 0)
            prediction_files[name] = dump_predictions(baseline, test, horizon, target_names)
        for kind in kinds:
            if kind == "persistence":
                continue
            for seed in seeds:
                name = run_name(kind, schema, horizon, seed)
                path = Path(weights_dir) / f"{name}.wndc"
                if not path.exists():
                    raise ConfigurationError(f"missing weight file {path}")
                model = build_model(kind, schema.input_shape, len(schema.target_indices),
                                    seed=seed)
                load_weights_file(model, path)
                trace_path = Path(weights_dir) / f"{name}.trace.jsonl"
                epochs = None
                if trace_path.exists():
                    epochs = sum(1 for line in trace_path.read_text().splitlines() if line.strip())
                reports.append(evaluate(model, test, schema.id, horizon, target_names,
                                        seed=seed, epochs=epochs,
                                        filled_cells=table.filled_cells,
                                        config_digest=digest))
                if args.dump_predictions:
                    prediction_files[name] = dump_predictions(model, test, horizon, target_names)
    return reports, prediction_files


def cmd_evaluate(args) -> int:
    config = _read_config(args.config)
    schema = resolve_schema(args, config)
    kinds = resolve_models(args, config)
    seeds = resolve_seeds(args, config)
    formats = _csv_list(args.format or "markdown,json,csv")
    for fmt in formats:
        if fmt not in ("markdown", "json", "csv"):
            raise ConfigurationError(f"unknown report format {fmt!r}")
    out_dir = Path(args.out or "reports")
    out_dir.mkdir(parents=True, exist_ok=True)

    table = load_csv(args.data, schema)
    reports, prediction_files = _evaluate_grid(
        args, config, schema, table, kinds, seeds, args.weights or "runs")

    decimals = MARKDOWN_DECIMALS.get(schema.id, 3)
    suffix = {"markdown": "md", "json": "json", "csv": "csv"}
    for fmt in formats:
        text = emit_report(reports, fmt, decimals=decimals)
        (out_dir / f"reports_{_short_id(schema)}.{suffix[fmt]}").write_text(text)
    for name, text in prediction_files.items():
        (out_dir / f"predictions_{name}.csv").write_text(text)

    print(reports_to_markdown(reports, decimals=decimals))
    print(f"wrote {len(formats)} report file(s) and {len(prediction_files)} "
          f"prediction dump(s) to {out_dir}")
    return 0


# -- repro ---------------------------------------------------------------------


class _CriterionLog:
    def __init__(self):
        self.results = []

    def record(self, name: str, passed: bool, detail: str = ""):
        verdict = "PASS" if passed else "FAIL"
        print(f"[{verdict}] {name}" + (f": {detail}" if detail else ""))
        self.results.append((name, passed))

    @property
    def all_passed(self) -> bool:
        return all(ok for _, ok in self.results)


def _check_persistence(log, schema, splits, ref):
    target_names = list(schema.target_cities)
    for horizon in schema.horizons_hours:
        baseline = PersistenceBaseline(schema.input_shape, schema.target_indices)
        report = evaluate(baseline, splits.by_horizon[horizon].test, schema.id,
                          horizon, target_names)
        for metric, observed in (("MAE", report.mae), ("MSE", report.mse)):
            key = "persistence_mae" if metric == "MAE" else "persistence_mse"
            expected = ref[key][horizon]
            delta = abs(observed - expected)
            ok = delta <= ref["persistence_rel_tol"] * expected
            log.record(f"persistence {metric} {horizon}h",
                       ok, f"expected {expected}, observed {observed:.4f}, |delta| {delta:.4f}")
    return {h: evaluate(PersistenceBaseline(schema.input_shape, schema.target_indices),
                        splits.by_horizon[h].test, schema.id, h, target_names).mae
            for h in schema.horizons_hours}


def _median_mae(kind, schema, splits, horizon, seeds, train_config_base, out_dir):
    values = []
    for seed in seeds:
        model = build_model(kind, schema.input_shape, len(schema.target_indices), seed=seed)
        tc = dataclasses.replace(train_config_base, seed=seed)
        fit(model, splits.by_horizon[horizon].train, splits.by_horizon[horizon].val, tc)
        if out_dir is not None:
            save_weights_file(model, Path(out_dir) / f"{run_name(kind, schema, horizon, seed)}.wndc")
        report = evaluate(model, splits.by_horizon[horizon].test, schema.id, horizon,
                          list(schema.target_cities), seed=seed)
        values.append(report.mae)
    return statistics.median(values)


def _check_self_gradients(log):
    from .gradcheck import gradcheck
    from .layers import (AttentionAugmentation, BatchNorm, Conv2d, Conv3d, Dense,
                         DepthwiseSeparableConv, TransposedConv2d)
    rng = np.random.default_rng(2024)
    cases = []
    conv = Conv2d(2, 3, rng=rng)
    x = Tensor(rng.normal(size=(2, 2, 5, 5)))
    cases.append(("conv2d", lambda: conv(x).sum(), [x] + [t for _, t in conv.parameters()]))
    dsc = DepthwiseSeparableConv(2, 4, rng=rng)
    x2 = Tensor(rng.normal(size=(3, 2, 5, 5)))
    cases.append(("depthwise-separable", lambda: dsc(x2).sum(),
                  [x2] + [t for _, t in dsc.parameters()]))
    c3 = Conv3d(1, 2, rng=rng)
    x3 = Tensor(rng.normal(size=(2, 1, 4, 4, 4)))
    cases.append(("conv3d", lambda: c3(x3).sum(), [x3] + [t for _, t in c3.parameters()]))
    up = TransposedConv2d(2, 3, rng=rng)
    x4 = Tensor(rng.normal(size=(2, 2, 3, 3)))
    cases.append(("transposed-conv", lambda: up(x4).sum(), [x4] + [t for _, t in up.parameters()]))
    att = AttentionAugmentation(3, rng=rng)
    x5 = Tensor(rng.normal(size=(2, 3, 2, 2)))
    cases.append(("attention", lambda: att(x5).sum(), [x5] + [t for _, t in att.parameters()]))
    dense = Dense(6, 4, rng=rng)
    x6 = Tensor(rng.normal(size=(3, 6)))
    cases.append(("dense", lambda: dense(x6).sum(), [x6] + [t for _, t in dense.parameters()]))
    bn = BatchNorm(3)
    x7 = Tensor(rng.normal(size=(4, 3, 2, 2)))
    scale = Tensor(rng.normal(size=(4, 3, 2, 2)))
    cases.append(("batch-norm", lambda: (bn(x7) * scale).sum(),
                  [x7, bn.gamma, bn.beta]))

    worst = 0.0
    try:
        for _, fn, wrt in cases:
            worst = max(worst, gradcheck(fn, wrt, max_entries_per_tensor=20, rng=rng))
        model = build_model("multidim", (4, 3, 3), 2, seed=5)
        xm = Tensor(rng.normal(size=(4, 4, 3, 3)))
        worst = max(worst, gradcheck(lambda: model.forward(xm).sum(),
                                     [t for _, t in model.parameters()],
                                     max_entries_per_tensor=4, rng=rng))
        log.record("gradient checks", True, f"max relative error {worst:.2e} < 1e-4")
    except AssertionError as exc:
        log.record("gradient checks", False, str(exc))


def _check_self_conv_oracles(log):
    from . import naive
    from .layers import conv2d, conv3d, depthwise_conv2d, pointwise_conv2d, transposed_conv2d
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=(2, 5, 5))
        k = rng.normal(size=(3, 2, 3, 3))
        b = rng.normal(size=3)
        worst = max(worst, float(np.abs(
            conv2d(Tensor(x), Tensor(k), Tensor(b)).data
            - naive.conv2d_reference(x, k, b)).max()))
        dk = rng.normal(size=(2, 3, 3))
        worst = max(worst, float(np.abs(
            depthwise_conv2d(Tensor(x), Tensor(dk)).data
            - naive.depthwise_reference(x, dk)).max()))
        pw = rng.normal(size=(4, 2))
        worst = max(worst, float(np.abs(
            pointwise_conv2d(Tensor(x), Tensor(pw)).data
            - naive.pointwise_reference(x, pw)).max()))
        x3 = rng.normal(size=(1, 4, 4, 4))
        k3 = rng.normal(size=(2, 1, 3, 3, 3))
        worst = max(worst, float(np.abs(
            conv3d(Tensor(x3), Tensor(k3)).data
            - naive.conv3d_reference(x3, k3)).max()))
        kt = rng.normal(size=(2, 3, 2, 2))
        y = rng.normal(size=(3, 6, 6))
        worst = max(worst, float(np.abs(
            transposed_conv2d(Tensor(x[:, :3, :3]), Tensor(kt)).data
            - naive.transposed_conv2d_reference(x[:, :3, :3], kt)).max()))
        lhs = float(np.sum(transposed_conv2d(Tensor(x[:, :3, :3]), Tensor(kt)).data * y))
        rhs = float(np.sum(x[:, :3, :3] * naive.strided_conv2x2_reference(y, kt)))
        adjoint_gap = abs(lhs - rhs)
        if adjoint_gap > 1e-10:
            log.record("convolution oracles", False, f"adjoint identity gap {adjoint_gap:.2e}")
            return
    log.record("convolution oracles", worst < 1e-12,
               f"max |fast - naive| {worst:.2e} (tol 1e-12), adjoint gap < 1e-10")


def _check_self_pipeline(log, table, schema):
    scaler = fit_scaler(table, schema.train_range)
    rows = table.values[:200] if table.n_rows >= 200 else table.values
    round_trip = scaler.inverse(scaler.transform(rows))
    nonconst = ~scaler.constant_columns
    exact = np.array_equal(round_trip[:, nonconst], rows[:, nonconst])
    log.record("scaler round-trip", exact, "inverse(transform(x)) == x on non-constant columns")

    ok = True
    for n, t, d in ((40, 4, 6), (30, 6, 1), (25, 2, 12)):
        samples = make_windows(table, scaler, t, d, schema.target_indices, (0, n))
        ok = ok and len(samples) == n - (t - 1) - d
    log.record("window-count formula", ok, "N-(T-1)-delta over an (N,T,delta) grid")

    splits = split(table, schema)
    h = schema.horizons_hours[0]
    test_start = np.datetime64(schema.test_range[0])
    first = splits.by_horizon[h].test[0]
    leak_free = first.anchor >= test_start
    for part in (splits.by_horizon[h].train, splits.by_horizon[h].val):
        leak_free = leak_free and max(s.anchor for s in part) < test_start
    log.record("no-leakage", bool(leak_free), "train/val anchors precede the test range")

    tc = TrainConfig(max_epochs=3, batch_size=16, patience=2, seed=11)
    blobs = []
    for _ in range(2):
        model = build_model("conv2d", schema.input_shape, len(schema.target_indices), seed=11)
        fit(model, splits.by_horizon[h].train[:64], splits.by_horizon[h].val[:32], tc)
        from .weights import save_weights
        blobs.append(save_weights(model))
    log.record("bit-reproducible training", blobs[0] == blobs[1],
               "identical weight bytes for repeated seeded runs")


def _check_parameters(log, schema):
    frozen = reference.FROZEN_PARAMETER_COUNTS.get(schema.id, {})
    published = reference.REFERENCE_PARAMETER_COUNTS.get(schema.id, {})
    all_ok = True
    print(f"  parameter counts ({schema.id}): ours vs reference")
    for kind in TRAINABLE_KINDS:
        model = build_model(kind, schema.input_shape, len(schema.target_indices), seed=0)
        counted = count_parameters(model)
        analytic = expected_parameter_count(kind, schema.input_shape,
                                            len(schema.target_indices))
        ok = counted == analytic and (kind not in frozen or counted == frozen[kind])
        all_ok = all_ok and ok
        ref_text = published.get(kind, "n/a")
        print(f"    {kind:18s} ours={counted:>8} reference={ref_text}")
    c = schema.input_shape[0]
    dsc_saves = all(cin * 9 + cin * cout < 9 * cin * cout
                    for cin, cout in ((c, 16), (schema.input_shape[1], 16),
                                      (schema.input_shape[2], 16), (c, 32), (32, 32)))
    log.record("parameter accounting", all_ok and dsc_saves,
               "count_parameters == closed-form == frozen; DSC cheaper than standard conv")


def cmd_repro(args) -> int:
    config = _read_config(args.config)
    schema = resolve_schema(args, config)
    if schema.id not in reference.REFERENCE_ERRORS:
        raise ConfigurationError(f"repro targets exist only for denmark/netherlands, not {schema.id!r}")
    ref = reference.REFERENCE_ERRORS[schema.id]
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    table = load_csv(args.data, schema)
    print(f"loaded {args.data}: {table.n_rows} timestamps "
          f"({table.n_station_rows} station-rows)")
    splits = split(table, schema)
    log = _CriterionLog()

    persistence_mae = _check_persistence(log, schema, splits, ref)

    seeds = reference.ACCEPTANCE_SEEDS
    tc_base = resolve_train_config(args, config, seeds[0])
    bounds = reference.MULTIDIM_MAE_BOUNDS[schema.id]
    multidim_medians = {}
    for horizon in schema.horizons_hours:
        median = _median_mae("multidim", schema, splits, horizon, seeds, tc_base, out_dir)
        multidim_medians[horizon] = median
        detail = f"median MAE {median:.4f} vs persistence {persistence_mae[horizon]:.4f}"
        if horizon in bounds:
            ok = median <= bounds[horizon] and median < persistence_mae[horizon]
            detail += f", bound {bounds[horizon]}"
        else:
            ok = median < persistence_mae[horizon]
        log.record(f"multidim quality {horizon}h", ok, detail)

    comparison_kinds = [k for k in resolve_models(args, config)
                        if k not in ("persistence", "multidim")]
    for kind in comparison_kinds:
        for horizon in schema.horizons_hours:
            median = _median_mae(kind, schema, splits, horizon, seeds, tc_base, out_dir)
            log.record(f"{kind} beats persistence {horizon}h",
                       median < persistence_mae[horizon],
                       f"median MAE {median:.4f} vs {persistence_mae[horizon]:.4f}")

    _check_self_gradients(log)
    _check_self_conv_oracles(log)
    _check_self_pipeline(log, table, schema)
    _check_parameters(log, schema)

    passed = sum(1 for _, ok in log.results if ok)
    print(f"\n{passed}/{len(log.results)} criteria passed")
    return 0 if log.all_passed else 1


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windcast",
        description="Wind speed forecasting experiments: convolutional models "
                    "against a persistence baseline on city/time/feature windows.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="convert an upstream export to the canonical CSV")
    p.add_argument("input", help="upstream file or per-city directory")
    p.add_argument("--dataset", help="denmark, netherlands, or custom")
    p.add_argument("--out", help="output canonical CSV path")
    p.add_argument("--config", help="INI config file")
    p.set_defaults(func=cmd_convert)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("data", help="canonical CSV path")
    common.add_argument("--dataset", help="denmark, netherlands, or custom")
    common.add_argument("--config", help="INI config file")
    common.add_argument("--horizons", help="comma-separated horizon hours override")
    common.add_argument("--out", help="output directory")

    train_flags = argparse.ArgumentParser(add_help=False)
    train_flags.add_argument("--epochs", type=int, help="max training epochs")
    train_flags.add_argument("--batch-size", type=int, dest="batch_size")
    train_flags.add_argument("--learning-rate", type=float, dest="learning_rate")
    train_flags.add_argument("--patience", type=int)

    p = sub.add_parser("train", parents=[common, train_flags],
                       help="train models; one weight file and trace per (model, horizon, seed)")
    p.add_argument("--models", help="comma-separated model kinds")
    p.add_argument("--seeds", help="comma-separated seeds (default 42)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common],
                       help="evaluate trained weights plus the persistence baseline")
    p.add_argument("--models", help="comma-separated model kinds (persistence needs no weights)")
    p.add_argument("--seeds", help="comma-separated seeds to evaluate")
    p.add_argument("--weights", help="directory with .wndc files (default runs)")
    p.add_argument("--format", help="comma-separated: markdown,json,csv")
    p.add_argument("--dump-predictions", action="store_true",
                   help="write per-timestamp prediction traces")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("repro", parents=[common, train_flags],
                       help="run the pipeline with pinned seeds and check the reference results")
    p.add_argument("--models", help="narrow the trained model kinds (default: all five)")
    p.set_defaults(func=cmd_repro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    except (ConfigurationError, ConversionError, IngestionError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
