"""Wind speed forecasting with multidimensional depthwise-separable CNNs.

The package trains five small convolutional architectures from scratch on
spatio-temporal weather windows (cities x time steps x features) and
compares them against a persistence baseline, reproducing a published
benchmark table. Everything numeric runs on an in-package reverse-mode
autodiff core over float64 numpy arrays.
"""

from .autodiff import ShapeError, Tensor, concat, linear, softmax_last_axis
from .data import (
    DENMARK,
    NETHERLANDS,
    SCHEMAS,
    ConfigurationError,
    DatasetSchema,
    IngestionError,
    MinMaxScaler,
    SampleWindow,
    WeatherTable,
    fit_scaler,
    load_csv,
    make_windows,
    split,
    stack_samples,
)
from .gradcheck import gradcheck
from .models import (
    MODEL_KINDS,
    Model,
    ModelSpec,
    PersistenceBaseline,
    build_conv2d,
    build_conv2d_attention,
    build_conv2d_upscaling,
    build_conv3d,
    build_model,
    build_multidim,
    count_parameters,
    expected_parameter_count,
    persistence_predict,
)
from .reporting import (
    ExperimentReport,
    dump_predictions,
    emit_report,
    evaluate,
    mae,
    mse,
    per_city_mean_over_horizons,
)
from .training import Adam, DivergenceError, EarlyStopping, TrainConfig, TrainingTrace, fit, mse_loss
from .weights import FormatError, load_weights, load_weights_file, save_weights, save_weights_file

__version__ = "0.1.0"

__all__ = [
    "Adam", "ConfigurationError", "DatasetSchema", "DENMARK", "DivergenceError",
    "EarlyStopping", "ExperimentReport", "FormatError", "IngestionError",
    "MinMaxScaler", "Model", "ModelSpec", "MODEL_KINDS", "NETHERLANDS",
    "PersistenceBaseline", "SampleWindow", "SCHEMAS", "ShapeError", "Tensor",
    "TrainConfig", "TrainingTrace", "WeatherTable",
    "build_conv2d", "build_conv2d_attention", "build_conv2d_upscaling",
    "build_conv3d", "build_model", "build_multidim", "concat",
    "count_parameters", "dump_predictions", "emit_report", "evaluate",
    "expected_parameter_count", "fit", "fit_scaler", "gradcheck", "linear",
    "load_csv", "load_weights", "load_weights_file", "mae", "make_windows",
    "mse", "mse_loss", "per_city_mean_over_horizons", "persistence_predict",
    "save_weights", "save_weights_file", "softmax_last_axis", "split",
    "stack_samples",
]
