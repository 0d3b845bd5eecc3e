"""MAE/MSE evaluation, per-city aggregation, and report emission.

Errors are always computed on raw-unit predictions. The "average over
target cities" is the unweighted mean of per-city errors, which equals the
pooled error because every city contributes the same number of samples.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import statistics
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .data import SampleWindow, stack_samples
from .models import ConfigurationError, count_parameters

REPORT_CSV_HEADER = ["model", "dataset", "horizon", "city", "mae", "mse",
                     "params", "seed", "epochs"]
AVERAGE_CITY = "average"


def mae(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean absolute error."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ValueError("mae of an empty vector is undefined")
    return float(np.mean(np.abs(y - y_hat)))


def mse(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Mean squared error."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    if y.size == 0:
        raise ValueError("mse of an empty vector is undefined")
    return float(np.mean((y - y_hat) ** 2))


@dataclass
class ExperimentReport:
    """Per-model, per-horizon results over the target cities."""

    dataset: str
    model: str
    horizon: int
    cities: Sequence[str]
    mae_per_city: Dict[str, float]
    mse_per_city: Dict[str, float]
    mae: float
    mse: float
    params: int
    seed: Optional[int] = None
    epochs: Optional[int] = None
    filled_cells: int = 0
    config_digest: str = ""

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset, "model": self.model, "horizon": self.horizon,
            "cities": list(self.cities),
            "mae_per_city": dict(self.mae_per_city),
            "mse_per_city": dict(self.mse_per_city),
            "mae": self.mae, "mse": self.mse, "params": self.params,
            "seed": self.seed, "epochs": self.epochs,
            "filled_cells": self.filled_cells, "config_digest": self.config_digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(dataset=d["dataset"], model=d["model"], horizon=d["horizon"],
                   cities=tuple(d["cities"]),
                   mae_per_city=dict(d["mae_per_city"]),
                   mse_per_city=dict(d["mse_per_city"]),
                   mae=d["mae"], mse=d["mse"], params=d["params"],
                   seed=d.get("seed"), epochs=d.get("epochs"),
                   filled_cells=d.get("filled_cells", 0),
                   config_digest=d.get("config_digest", ""))


def predictions_of(predictor, samples: Sequence[SampleWindow]) -> np.ndarray:
    """Raw-unit predictions for a sample list, from a model or baseline."""
    if hasattr(predictor, "predict_samples"):
        return predictor.predict_samples(samples)
    inputs, _ = stack_samples(samples)
    if tuple(inputs.shape[1:]) != tuple(predictor.spec.input_shape):
        raise ConfigurationError(
            f"samples have shape {inputs.shape[1:]}, model expects {predictor.spec.input_shape}"
        )
    return predictor.predict(inputs)


def evaluate(predictor, samples: Sequence[SampleWindow], dataset: str, horizon: int,
             city_names: Sequence[str], seed: Optional[int] = None,
             epochs: Optional[int] = None, filled_cells: int = 0,
             config_digest: str = "") -> ExperimentReport:
    """Per-city and averaged MAE/MSE of a predictor on a test sample set."""
    if not len(samples):
        raise ValueError("evaluate requires a nonempty sample set")
    preds = predictions_of(predictor, samples)
    _, targets = stack_samples(samples)
    if preds.shape != targets.shape:
        raise ConfigurationError(
            f"predictions {preds.shape} do not match targets {targets.shape}"
        )
    if preds.shape[1] != len(city_names):
        raise ConfigurationError(
            f"{len(city_names)} city names for {preds.shape[1]} outputs"
        )
    mae_per_city = {c: mae(targets[:, i], preds[:, i]) for i, c in enumerate(city_names)}
    mse_per_city = {c: mse(targets[:, i], preds[:, i]) for i, c in enumerate(city_names)}
    return ExperimentReport(
        dataset=dataset, model=predictor.kind, horizon=horizon,
        cities=tuple(city_names),
        mae_per_city=mae_per_city, mse_per_city=mse_per_city,
        mae=float(np.mean(list(mae_per_city.values()))),
        mse=float(np.mean(list(mse_per_city.values()))),
        params=count_parameters(predictor), seed=seed, epochs=epochs,
        filled_cells=filled_cells, config_digest=config_digest,
    )


def per_city_mean_over_horizons(reports: Sequence[ExperimentReport],
                                horizons: Optional[Sequence[int]] = None) -> Dict[str, float]:
    """Mean per-city MAE across horizons for one (dataset, model) pair."""
    if not reports:
        raise ValueError("no reports given")
    datasets = {r.dataset for r in reports}
    models = {r.model for r in reports}
    if len(datasets) > 1 or len(models) > 1:
        raise ValueError("reports must share one dataset and one model kind")
    seen = [r.horizon for r in reports]
    if len(set(seen)) != len(seen):
        raise ValueError(f"duplicate horizon in reports: {sorted(seen)}")
    if horizons is not None and set(seen) != set(horizons):
        raise ValueError(f"expected horizons {sorted(horizons)}, got {sorted(seen)}")
    cities = list(reports[0].cities)
    for r in reports[1:]:
        if list(r.cities) != cities:
            raise ValueError("reports disagree on the city set")
    return {c: float(np.mean([r.mae_per_city[c] for r in reports])) for c in cities}


# -- emission -----------------------------------------------------------------


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def reports_to_json(reports: Sequence[ExperimentReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"


def reports_from_json(text: str) -> List[ExperimentReport]:
    return [ExperimentReport.from_dict(d) for d in json.loads(text)]


def reports_to_csv(reports: Sequence[ExperimentReport]) -> str:
    """Per-city rows plus one 'average' row per report, full precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_CSV_HEADER)
    for r in reports:
        for city in r.cities:
            writer.writerow([r.model, r.dataset, r.horizon, city,
                             _fmt(r.mae_per_city[city]), _fmt(r.mse_per_city[city]),
                             r.params, "" if r.seed is None else r.seed,
                             "" if r.epochs is None else r.epochs])
        writer.writerow([r.model, r.dataset, r.horizon, AVERAGE_CITY,
                         _fmt(r.mae), _fmt(r.mse), r.params,
                         "" if r.seed is None else r.seed,
                         "" if r.epochs is None else r.epochs])
    return buf.getvalue()


def reports_from_csv(text: str) -> List[ExperimentReport]:
    """Rebuild reports from the CSV emitted by ``reports_to_csv``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != REPORT_CSV_HEADER:
        raise ValueError("unrecognized report CSV header")
    grouped: Dict[tuple, dict] = {}
    for model, dataset, horizon, city, m, s, params, seed, epochs in rows[1:]:
        key = (model, dataset, int(horizon), seed)
        entry = grouped.setdefault(key, {"cities": [], "mae": {}, "mse": {},
                                         "params": int(params),
                                         "seed": None if seed == "" else int(seed),
                                         "epochs": None if epochs == "" else int(epochs),
                                         "avg": None})
        if city == AVERAGE_CITY:
            entry["avg"] = (float(m), float(s))
        else:
            entry["cities"].append(city)
            entry["mae"][city] = float(m)
            entry["mse"][city] = float(s)
    out = []
    for (model, dataset, horizon, _), e in grouped.items():
        avg_mae, avg_mse = e["avg"] if e["avg"] else (
            float(np.mean(list(e["mae"].values()))), float(np.mean(list(e["mse"].values()))))
        out.append(ExperimentReport(
            dataset=dataset, model=model, horizon=horizon, cities=tuple(e["cities"]),
            mae_per_city=e["mae"], mse_per_city=e["mse"],
            mae=avg_mae, mse=avg_mse, params=e["params"],
            seed=e["seed"], epochs=e["epochs"]))
    return out


def reports_to_markdown(reports: Sequence[ExperimentReport], decimals: int = 3) -> str:
    """Model x horizon grid of averaged MAE/MSE; column minima are bolded.

    When several reports exist for one (model, horizon) cell -- one per
    seed -- the cell shows their median.
    """
    if not reports:
        raise ValueError("no reports given")
    horizons = sorted({r.horizon for r in reports})
    models = list(dict.fromkeys(r.model for r in reports))  # keep first-seen order
    cells_mae: Dict[tuple, float] = {}
    cells_mse: Dict[tuple, float] = {}
    for m in models:
        for h in horizons:
            sub = [r for r in reports if r.model == m and r.horizon == h]
            if sub:
                cells_mae[(m, h)] = statistics.median(r.mae for r in sub)
                cells_mse[(m, h)] = statistics.median(r.mse for r in sub)

    def column_min(cells, h):
        vals = [cells[(m, h)] for m in models if (m, h) in cells]
        return min(vals) if vals else None

    best_mae = {h: column_min(cells_mae, h) for h in horizons}
    best_mse = {h: column_min(cells_mse, h) for h in horizons}

    header = (["Model"] + [f"MAE {h}h" for h in horizons]
              + [f"MSE {h}h" for h in horizons])
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for m in models:
        row = [m]
        for cells, best in ((cells_mae, best_mae), (cells_mse, best_mse)):
            for h in horizons:
                if (m, h) not in cells:
                    row.append("-")
                    continue
                text = f"{cells[(m, h)]:.{decimals}f}"
                if best[h] is not None and cells[(m, h)] == best[h]:
                    text = f"**{text}**"
                row.append(text)
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def emit_report(reports: Sequence[ExperimentReport], format: str,
                decimals: int = 3) -> str:
    """Render reports as 'json', 'csv', or 'markdown'."""
    if not reports:
        raise ValueError("no reports given")
    if format == "json":
        return reports_to_json(reports)
    if format == "csv":
        return reports_to_csv(reports)
    if format == "markdown":
        return reports_to_markdown(reports, decimals=decimals)
    raise ValueError(f"unknown report format {format!r}")


def dump_predictions(predictor, samples: Sequence[SampleWindow], horizon: int,
                     city_names: Sequence[str]) -> str:
    """CSV of (timestamp, city, horizon, y, y_hat) rows for external plotting."""
    preds = predictions_of(predictor, samples)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["timestamp", "city", "horizon", "y", "y_hat"])
    for sample, row in zip(samples, preds):
        stamp = np.datetime_as_string(sample.anchor, unit="s")
        for i, city in enumerate(city_names):
            writer.writerow([stamp, city, horizon, _fmt(float(sample.target[i])),
                             _fmt(float(row[i]))])
    return buf.getvalue()


def content_digest(*parts: bytes) -> str:
    """Stable hex digest of configuration plus input file contents."""
    h = hashlib.sha256()
    for part in parts:
        h.update(hashlib.sha256(part).digest())
    return h.hexdigest()[:16]
