"""Builders for the five forecasting architectures plus the persistence baseline.

Every trainable model maps a batch of normalized (C,T,F) windows -- cities x
time steps x weather features -- to one wind-speed value per target city, in
raw units. Feature-map counts follow the comparison protocol: 32 for the 2D
variants, 10 for the 3D variant, 16 per view for the multidimensional model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .autodiff import Tensor, concat
from .layers import (
    AttentionAugmentation,
    BatchNorm,
    Conv2d,
    Conv3d,
    Dense,
    DepthwiseSeparableConv,
    TransposedConv2d,
)

MODEL_KINDS = ("multidim", "conv2d", "conv2d_attention", "conv2d_upscaling",
               "conv3d", "persistence")

HIDDEN_UNITS = 128
FEATURE_MAPS = {"multidim": 16, "conv2d": 32, "conv2d_attention": 32,
                "conv2d_upscaling": 32, "conv3d": 10}


class ConfigurationError(ValueError):
    """Input shape or model configuration cannot produce a valid network."""


@dataclass(frozen=True)
class ModelSpec:
    """Identity of a built model; weight files must match it to load."""

    kind: str
    input_shape: Tuple[int, int, int]
    targets: int


class Model:
    """Base for the trainable architectures.

    Subclasses populate ``_children`` as ordered (name, layer) pairs; the
    parameter registry, mode switching, and serialization views derive
    from that list.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self._children: List[tuple] = []
        self.training = True

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    @property
    def kind(self) -> str:
        return self.spec.kind

    def parameters(self) -> List[Tuple[str, Tensor]]:
        """Ordered (name, tensor) registry; every parameter appears once."""
        out = []
        for name, child in self._children:
            out += [(f"{name}.{pn}", t) for pn, t in child.parameters()]
        return out

    def state_arrays(self) -> List[Tuple[str, np.ndarray]]:
        """Parameters plus batch-norm running statistics, for serialization."""
        out = [(name, t.data) for name, t in self.parameters()]
        for name, child in self._children:
            for bn_name, bn in self._batchnorms_of(name, child):
                out += [(f"{bn_name}.{sn}", arr) for sn, arr in bn.state()]
        return out

    @staticmethod
    def _batchnorms_of(name: str, child):
        if isinstance(child, BatchNorm):
            return [(name, child)]
        if isinstance(child, DepthwiseSeparableConv):
            return [(f"{name}.bn", child.bn)]
        return []

    def batchnorms(self) -> List[BatchNorm]:
        out = []
        for name, child in self._children:
            out += [bn for _, bn in self._batchnorms_of(name, child)]
        return out

    def train(self) -> "Model":
        self.training = True
        for bn in self.batchnorms():
            bn.training = True
        return self

    def eval(self) -> "Model":
        self.training = False
        for bn in self.batchnorms():
            bn.training = False
        return self

    def predict(self, inputs: np.ndarray, batch_size: int = 512) -> np.ndarray:
        """Forward a stacked (N,C,T,F) array in eval mode; returns (N, targets)."""
        was_training = self.training
        self.eval()
        chunks = []
        for start in range(0, len(inputs), batch_size):
            out = self.forward(Tensor(inputs[start:start + batch_size]))
            chunks.append(out.data)
        if was_training:
            self.train()
        return np.concatenate(chunks, axis=0)


def _require_min_extents(input_shape: Sequence[int], minimum: int, kind: str) -> None:
    if len(input_shape) != 3:
        raise ConfigurationError(f"{kind} expects a (C,T,F) input shape, got {tuple(input_shape)}")
    if min(input_shape) < minimum:
        raise ConfigurationError(
            f"{kind} requires every input extent >= {minimum}, got {tuple(input_shape)}"
        )


def _flatten_batch(t: Tensor) -> Tensor:
    return t.reshape((t.shape[0], -1))


class MultidimModel(Model):
    """Depthwise-separable convolutions over all three views of the window.

    The three branches see the window as channels x (T,F), T x (C,F) and
    F x (C,T) -- i.e. kernels slide over time-features, cities-features and
    cities-time planes. Branch outputs are flattened, concatenated, and fed
    through the shared dense head.
    """

    def __init__(self, input_shape, targets: int, feature_maps: int = 16,
                 hidden_units: int = HIDDEN_UNITS, seed: int = 42):
        _require_min_extents(input_shape, 3, "multidim")
        c, t, f = input_shape
        super().__init__(ModelSpec("multidim", (c, t, f), targets))
        rng = np.random.default_rng(seed)
        m = feature_maps
        self.branch_cities = DepthwiseSeparableConv(c, m, rng=rng)
        self.branch_time = DepthwiseSeparableConv(t, m, rng=rng)
        self.branch_features = DepthwiseSeparableConv(f, m, rng=rng)
        concat_len = m * ((t - 2) * (f - 2) + (c - 2) * (f - 2) + (c - 2) * (t - 2))
        self.hidden = Dense(concat_len, hidden_units, rng=rng)
        self.head = Dense(hidden_units, targets, rng=rng)
        self._children = [
            ("branch_cities", self.branch_cities),
            ("branch_time", self.branch_time),
            ("branch_features", self.branch_features),
            ("hidden", self.hidden),
            ("head", self.head),
        ]

    def forward(self, x: Tensor) -> Tensor:
        b1 = self.branch_cities(x)
        b2 = self.branch_time(x.permute((0, 2, 1, 3)))
        b3 = self.branch_features(x.permute((0, 3, 1, 2)))
        z = concat([_flatten_batch(b1), _flatten_batch(b2), _flatten_batch(b3)], axis=1)
        return self.head(self.hidden(z).relu())


class Conv2dModel(Model):
    """Cities-as-channels 2D convolution followed by the dense head."""

    def __init__(self, input_shape, targets: int, feature_maps: int = 32,
                 hidden_units: int = HIDDEN_UNITS, seed: int = 42):
        _require_min_extents(input_shape, 3, "conv2d")
        c, t, f = input_shape
        super().__init__(ModelSpec("conv2d", (c, t, f), targets))
        rng = np.random.default_rng(seed)
        self.conv = Conv2d(c, feature_maps, rng=rng)
        self.hidden = Dense(feature_maps * (t - 2) * (f - 2), hidden_units, rng=rng)
        self.head = Dense(hidden_units, targets, rng=rng)
        self._children = [("conv", self.conv), ("hidden", self.hidden), ("head", self.head)]

    def forward(self, x: Tensor) -> Tensor:
        y = self.conv(x).relu()
        return self.head(self.hidden(_flatten_batch(y)).relu())


class Conv2dAttentionModel(Model):
    """Conv2dModel with attention channels concatenated before flattening."""

    def __init__(self, input_shape, targets: int, feature_maps: int = 32,
                 hidden_units: int = HIDDEN_UNITS, d_k: int = 4, d_v: int = 4,
                 seed: int = 42):
        _require_min_extents(input_shape, 3, "conv2d_attention")
        c, t, f = input_shape
        super().__init__(ModelSpec("conv2d_attention", (c, t, f), targets))
        rng = np.random.default_rng(seed)
        self.conv = Conv2d(c, feature_maps, rng=rng)
        self.attention = AttentionAugmentation(feature_maps, d_k, d_v, rng=rng)
        self.hidden = Dense((feature_maps + d_v) * (t - 2) * (f - 2), hidden_units, rng=rng)
        self.head = Dense(hidden_units, targets, rng=rng)
        self._children = [("conv", self.conv), ("attention", self.attention),
                          ("hidden", self.hidden), ("head", self.head)]

    def forward(self, x: Tensor) -> Tensor:
        y = self.attention(self.conv(x).relu())
        return self.head(self.hidden(_flatten_batch(y)).relu())


class Conv2dUpscalingModel(Model):
    """Learned 2x upscaling followed by two depthwise-separable blocks."""

    def __init__(self, input_shape, targets: int, feature_maps: int = 32,
                 hidden_units: int = HIDDEN_UNITS, seed: int = 42):
        _require_min_extents(input_shape, 3, "conv2d_upscaling")
        c, t, f = input_shape
        super().__init__(ModelSpec("conv2d_upscaling", (c, t, f), targets))
        rng = np.random.default_rng(seed)
        self.upscale = TransposedConv2d(c, c, rng=rng)
        self.block1 = DepthwiseSeparableConv(c, feature_maps, rng=rng)
        self.block2 = DepthwiseSeparableConv(feature_maps, feature_maps, rng=rng)
        flat = feature_maps * (2 * t - 4) * (2 * f - 4)
        self.hidden = Dense(flat, hidden_units, rng=rng)
        self.head = Dense(hidden_units, targets, rng=rng)
        self._children = [("upscale", self.upscale), ("block1", self.block1),
                          ("block2", self.block2), ("hidden", self.hidden),
                          ("head", self.head)]

    def forward(self, x: Tensor) -> Tensor:
        y = self.block2(self.block1(self.upscale(x)))
        return self.head(self.hidden(_flatten_batch(y)).relu())


class Conv3dModel(Model):
    """Single-channel 3D convolution over the full (C,T,F) volume."""

    def __init__(self, input_shape, targets: int, feature_maps: int = 10,
                 hidden_units: int = HIDDEN_UNITS, seed: int = 42):
        _require_min_extents(input_shape, 3, "conv3d")
        c, t, f = input_shape
        super().__init__(ModelSpec("conv3d", (c, t, f), targets))
        rng = np.random.default_rng(seed)
        self.conv = Conv3d(1, feature_maps, rng=rng)
        self.hidden = Dense(feature_maps * (c - 2) * (t - 2) * (f - 2), hidden_units, rng=rng)
        self.head = Dense(hidden_units, targets, rng=rng)
        self._children = [("conv", self.conv), ("hidden", self.hidden), ("head", self.head)]

    def forward(self, x: Tensor) -> Tensor:
        volume = x.reshape((x.shape[0], 1) + x.shape[1:])
        y = self.conv(volume).relu()
        return self.head(self.hidden(_flatten_batch(y)).relu())


class PersistenceBaseline:
    """Predicts the last observed wind speed of each target city; no parameters."""

    kind = "persistence"

    def __init__(self, input_shape, target_indices: Sequence[int]):
        self.spec = ModelSpec("persistence", tuple(input_shape), len(target_indices))
        self.target_indices = tuple(target_indices)

    def parameters(self):
        return []

    def predict_samples(self, samples) -> np.ndarray:
        return np.stack([persistence_predict(s, self.target_indices) for s in samples])


def persistence_predict(window, target_indices: Sequence[int]) -> np.ndarray:
    """Last observed wind speed per target city, in raw units.

    Reads the raw (unnormalized) wind speeds the window recorded at its
    anchor time, so the result is independent of the scaler and of the
    forecast horizon.
    """
    return window.last_wind_raw[list(target_indices)].astype(np.float64)


_BUILDERS = {}


def _register(kind):
    def wrap(fn):
        _BUILDERS[kind] = fn
        return fn
    return wrap


@_register("multidim")
def build_multidim(input_shape, targets: int, seed: int = 42, **kwargs) -> MultidimModel:
    return MultidimModel(input_shape, targets, seed=seed, **kwargs)


@_register("conv2d")
def build_conv2d(input_shape, targets: int, seed: int = 42, **kwargs) -> Conv2dModel:
    return Conv2dModel(input_shape, targets, seed=seed, **kwargs)


@_register("conv2d_attention")
def build_conv2d_attention(input_shape, targets: int, seed: int = 42, **kwargs) -> Conv2dAttentionModel:
    return Conv2dAttentionModel(input_shape, targets, seed=seed, **kwargs)


@_register("conv2d_upscaling")
def build_conv2d_upscaling(input_shape, targets: int, seed: int = 42, **kwargs) -> Conv2dUpscalingModel:
    return Conv2dUpscalingModel(input_shape, targets, seed=seed, **kwargs)


@_register("conv3d")
def build_conv3d(input_shape, targets: int, seed: int = 42, **kwargs) -> Conv3dModel:
    return Conv3dModel(input_shape, targets, seed=seed, **kwargs)


def build_model(kind: str, input_shape, targets: int, seed: int = 42, **kwargs) -> Model:
    """Build any trainable architecture by kind name."""
    if kind not in _BUILDERS:
        raise ConfigurationError(f"unknown model kind {kind!r}; expected one of {sorted(_BUILDERS)}")
    return _BUILDERS[kind](input_shape, targets, seed=seed, **kwargs)


def count_parameters(model) -> int:
    """Total trainable parameter elements; running statistics excluded."""
    return sum(t.data.size for _, t in model.parameters())


def expected_parameter_count(kind: str, input_shape, targets: int) -> int:
    """Closed-form parameter count for a builder configuration.

    Mirrors the layer formulas directly (depthwise C*k^2, pointwise C*O,
    batch norm 2*O, conv O*(C*k^2+1), dense O*(I+1)) so builders can be
    regression-tested against an independent computation.
    """
    c, t, f = input_shape
    k2 = 9

    def dsc(cin, cout):
        return cin * k2 + cin * cout + 2 * cout

    def dense(i, o):
        return o * (i + 1)

    if kind == "multidim":
        m = 16
        concat_len = m * ((t - 2) * (f - 2) + (c - 2) * (f - 2) + (c - 2) * (t - 2))
        return dsc(c, m) + dsc(t, m) + dsc(f, m) + dense(concat_len, 128) + dense(128, targets)
    if kind == "conv2d":
        return 32 * (c * k2 + 1) + dense(32 * (t - 2) * (f - 2), 128) + dense(128, targets)
    if kind == "conv2d_attention":
        att = dense(32, 4) * 3  # query/key/value projections, d_k = d_v = 4
        return (32 * (c * k2 + 1) + att
                + dense(36 * (t - 2) * (f - 2), 128) + dense(128, targets))
    if kind == "conv2d_upscaling":
        upscale = c * c * 4 + c
        flat = 32 * (2 * t - 4) * (2 * f - 4)
        return upscale + dsc(c, 32) + dsc(32, 32) + dense(flat, 128) + dense(128, targets)
    if kind == "conv3d":
        return 10 * (27 + 1) + dense(10 * (c - 2) * (t - 2) * (f - 2), 128) + dense(128, targets)
    if kind == "persistence":
        return 0
    raise ConfigurationError(f"unknown model kind {kind!r}")
