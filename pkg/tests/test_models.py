"""Builder wiring, parameter accounting, persistence, and weight round trips."""

import numpy as np
import pytest

from windcast.autodiff import Tensor
from windcast.data import SampleWindow
from windcast.layers import depthwise_conv2d, pointwise_conv2d
from windcast.models import (
    ConfigurationError,
    MODEL_KINDS,
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
from windcast.reference import FROZEN_PARAMETER_COUNTS, INPUT_SHAPES, TARGET_COUNTS
from windcast.weights import FormatError, load_weights, save_weights

rng = np.random.default_rng(2023)

DK, NL = (5, 4, 4), (7, 6, 6)
TRAINABLE = [k for k in MODEL_KINDS if k != "persistence"]


# -- multidim wiring ---------------------------------------------------------------

def test_multidim_branch_shapes_denmark():
    model = build_multidim(DK, 3, seed=0)
    x = Tensor(rng.normal(size=(2, *DK)))
    assert model.branch_cities(x).shape == (2, 16, 2, 2)
    assert model.branch_time(x.permute((0, 2, 1, 3))).shape == (2, 16, 3, 2)
    assert model.branch_features(x.permute((0, 3, 1, 2))).shape == (2, 16, 3, 2)
    assert model.hidden.weights.shape[1] == 256


def test_multidim_branch_shapes_netherlands():
    model = build_multidim(NL, 7, seed=0)
    x = Tensor(rng.normal(size=(2, *NL)))
    assert model.branch_cities(x).shape == (2, 16, 4, 4)
    assert model.branch_time(x.permute((0, 2, 1, 3))).shape == (2, 16, 5, 4)
    assert model.branch_features(x.permute((0, 3, 1, 2))).shape == (2, 16, 5, 4)
    assert model.hidden.weights.shape[1] == 896


def test_multidim_zero_input_is_finite_and_deterministic():
    model = build_multidim(DK, 3, seed=7)
    x = Tensor(np.zeros((4, *DK)))
    out1 = model.forward(x).data
    out2 = model.forward(Tensor(np.zeros((4, *DK)))).data
    assert np.isfinite(out1).all()
    assert np.array_equal(out1, out2)


def test_multidim_view_consistency():
    # a branch applied after the graph permute equals the same depthwise and
    # pointwise kernels applied to a pre-permuted copy of the input
    model = build_multidim(DK, 3, seed=3)
    x = rng.normal(size=(2, *DK))
    branch = model.branch_time
    via_graph = branch(Tensor(x).permute((0, 2, 1, 3)))
    pre_permuted = np.ascontiguousarray(x.transpose(0, 2, 1, 3))
    manual = branch(Tensor(pre_permuted))
    assert np.array_equal(via_graph.data, manual.data)


# -- other builders ---------------------------------------------------------------

def test_conv2d_wiring_denmark():
    model = build_conv2d(DK, 3, seed=0)
    assert model.conv.kernels.shape == (32, 5, 3, 3)
    assert model.hidden.weights.shape == (128, 128)  # conv output (32,2,2) -> 128
    assert model.head.weights.shape == (3, 128)


def test_conv2d_attention_wiring_denmark():
    model = build_conv2d_attention(DK, 3, seed=0)
    assert model.hidden.weights.shape[1] == 36 * 2 * 2  # augmented (36,2,2)
    delta = count_parameters(model) - count_parameters(build_conv2d(DK, 3, seed=0))
    projections = 3 * (32 * 4 + 4)
    dense_growth = 128 * (144 - 128)
    assert delta == projections + dense_growth


def test_conv2d_upscaling_wiring():
    model = build_conv2d_upscaling(DK, 3, seed=0)
    x = Tensor(rng.normal(size=(2, *DK)))
    up = model.upscale(x)
    assert up.shape == (2, 5, 8, 8)
    b1 = model.block1(up)
    assert b1.shape == (2, 32, 6, 6)
    assert model.block2(b1).shape == (2, 32, 4, 4)
    assert model.hidden.weights.shape[1] == 512

    nl = build_conv2d_upscaling(NL, 7, seed=0)
    xnl = Tensor(rng.normal(size=(2, *NL)))
    assert nl.upscale(xnl).shape == (2, 7, 12, 12)
    assert nl.block1(nl.upscale(xnl)).shape == (2, 32, 10, 10)
    assert nl.hidden.weights.shape[1] == 2048


def test_conv3d_wiring():
    dk = build_conv3d(DK, 3, seed=0)
    assert dk.hidden.weights.shape[1] == 10 * 3 * 2 * 2  # (10,3,2,2) -> 120
    nl = build_conv3d(NL, 7, seed=0)
    assert nl.hidden.weights.shape[1] == 10 * 5 * 4 * 4  # (10,5,4,4) -> 800


@pytest.mark.parametrize("kind", TRAINABLE)
@pytest.mark.parametrize("shape,targets", [(DK, 3), (NL, 7)])
def test_forward_batch_contract(kind, shape, targets):
    model = build_model(kind, shape, targets, seed=1)
    out = model.forward(Tensor(rng.normal(size=(6, *shape))))
    assert out.shape == (6, targets)
    assert np.isfinite(out.data).all()


@pytest.mark.parametrize("kind", TRAINABLE)
def test_builders_reject_tiny_extents(kind):
    with pytest.raises(ConfigurationError):
        build_model(kind, (2, 4, 4), 3)
    with pytest.raises(ConfigurationError):
        build_model(kind, (5, 4), 3)


def test_build_model_unknown_kind():
    with pytest.raises(ConfigurationError):
        build_model("transformer", DK, 3)


# -- parameter accounting -----------------------------------------------------------

@pytest.mark.parametrize("dataset", ["denmark", "netherlands"])
@pytest.mark.parametrize("kind", TRAINABLE)
def test_count_matches_closed_form_and_frozen_values(dataset, kind):
    shape, targets = INPUT_SHAPES[dataset], TARGET_COUNTS[dataset]
    model = build_model(kind, shape, targets, seed=0)
    counted = count_parameters(model)
    assert counted == expected_parameter_count(kind, shape, targets)
    assert counted == FROZEN_PARAMETER_COUNTS[dataset][kind]


def test_registry_has_unique_names():
    for kind in TRAINABLE:
        names = [n for n, _ in build_model(kind, DK, 3, seed=0).parameters()]
        assert len(names) == len(set(names))


def test_dense_alone_param_count():
    from windcast.layers import Dense
    assert sum(t.size for _, t in Dense(128, 3).parameters()) == 387


def test_dsc_with_bn_param_count():
    from windcast.layers import DepthwiseSeparableConv
    block = DepthwiseSeparableConv(5, 16)
    assert sum(t.size for _, t in block.parameters()) == 45 + 80 + 32


def test_persistence_has_no_parameters():
    baseline = PersistenceBaseline(DK, (2, 3, 4))
    assert count_parameters(baseline) == 0
    assert expected_parameter_count("persistence", DK, 3) == 0


# -- persistence ---------------------------------------------------------------------

def _window(last_wind, target=None):
    c = len(last_wind)
    return SampleWindow(input=np.zeros((c, 4, 4)),
                        target=np.zeros(3) if target is None else target,
                        anchor=np.datetime64("2020-01-01T00:00"),
                        last_wind_raw=np.asarray(last_wind, dtype=float))


def test_persistence_returns_last_wind_speeds():
    window = _window([9.9, 1.0, 3.1, 4.0, 2.2])
    assert np.array_equal(persistence_predict(window, (2, 3, 4)), [3.1, 4.0, 2.2])


def test_persistence_is_horizon_and_scaler_independent():
    # the prediction is a function of the stored raw wind only; scaling the
    # normalized input or changing the horizon cannot change it
    window = _window([5.0, 6.0, 7.0])
    window.input[...] = 0.123
    first = persistence_predict(window, (0, 1))
    window.input[...] = 0.999
    assert np.array_equal(first, persistence_predict(window, (0, 1)))


def test_persistence_batch_prediction():
    baseline = PersistenceBaseline((3, 4, 4), (0, 2))
    windows = [_window([1.0, 2.0, 3.0]), _window([4.0, 5.0, 6.0])]
    assert np.array_equal(baseline.predict_samples(windows), [[1.0, 3.0], [4.0, 6.0]])


# -- weight serialization --------------------------------------------------------------

@pytest.mark.parametrize("kind", TRAINABLE)
def test_weight_round_trip_forward_identical(kind):
    model = build_model(kind, DK, 3, seed=11)
    x = rng.normal(size=(4, *DK))
    expected = model.predict(x)
    blob = save_weights(model)
    fresh = build_model(kind, DK, 3, seed=999)
    load_weights(fresh, blob)
    assert np.array_equal(fresh.predict(x), expected)


def test_weight_round_trip_preserves_running_stats():
    from windcast.training import TrainConfig, fit
    model = build_model("multidim", (3, 4, 3), 2, seed=1)
    # push running stats away from their init values
    for _ in range(3):
        model.train()
        model.forward(Tensor(rng.normal(size=(8, 3, 4, 3))))
    blob = save_weights(model)
    fresh = build_model("multidim", (3, 4, 3), 2, seed=2)
    load_weights(fresh, blob)
    for ours, theirs in zip(model.batchnorms(), fresh.batchnorms()):
        assert np.array_equal(ours.running_mean, theirs.running_mean)
        assert np.array_equal(ours.running_var, theirs.running_var)


def test_truncated_stream_is_rejected_without_partial_load():
    model = build_model("conv2d", DK, 3, seed=1)
    blob = save_weights(model)
    fresh = build_model("conv2d", DK, 3, seed=2)
    before = [t.data.copy() for _, t in fresh.parameters()]
    with pytest.raises(FormatError):
        load_weights(fresh, blob[: len(blob) // 2])
    for original, (_, t) in zip(before, fresh.parameters()):
        assert np.array_equal(original, t.data)


def test_checksum_mismatch_rejected():
    model = build_model("conv2d", DK, 3, seed=1)
    blob = bytearray(save_weights(model))
    blob[100] ^= 0xFF
    with pytest.raises(FormatError):
        load_weights(build_model("conv2d", DK, 3, seed=1), bytes(blob))


def test_spec_mismatch_rejected():
    blob = save_weights(build_model("conv2d", DK, 3, seed=1))
    with pytest.raises(FormatError):
        load_weights(build_model("multidim", DK, 3, seed=1), blob)
    with pytest.raises(FormatError):
        load_weights(build_model("conv2d", NL, 7, seed=1), blob)


def test_bad_magic_rejected():
    with pytest.raises(FormatError):
        load_weights(build_model("conv2d", DK, 3, seed=1), b"JUNK" + b"\x00" * 64)
