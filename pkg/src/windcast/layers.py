"""Parameterized neural layers over the autodiff core.

Convolutions use the cross-correlation convention (no kernel flip) and
stride 1; the only strided operation is the 2x2 stride-2 transposed
convolution used for upscaling. Each forward is a single graph node with
a vectorized backward rule, verified against finite differences and
nested-loop references in the test suite.

All spatial ops accept input with or without a leading batch axis.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .autodiff import ShapeError, Tensor, concat, linear, softmax_last_axis

BATCHNORM_EPS = 1e-5
BATCHNORM_MOMENTUM = 0.1


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> Tensor:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=shape))


def _with_batch(x: Tensor, unbatched_rank: int):
    """Normalize to batched form; returns (batched tensor, had_batch flag)."""
    if x.ndim == unbatched_rank:
        return x.reshape((1, *x.shape)), False
    if x.ndim == unbatched_rank + 1:
        return x, True
    raise ShapeError(f"expected rank {unbatched_rank} or {unbatched_rank + 1} input, got {x.shape}")


def _drop_batch(out: Tensor, had_batch: bool) -> Tensor:
    return out if had_batch else out.reshape(out.shape[1:])


def _pad_same_2d(k: int):
    if k % 2 == 0:
        raise ValueError("same padding requires an odd kernel size")
    return k // 2


# -- convolution forwards/backwards -----------------------------------------


def conv2d(x: Tensor, kernels: Tensor, bias: Optional[Tensor] = None,
           padding: str = "valid") -> Tensor:
    """2D cross-correlation. x: (B,C,H,W) or (C,H,W); kernels: (O,C,k,k)."""
    xb, had_batch = _with_batch(x, 3)
    out_ch, in_ch, k, k2 = kernels.shape
    if k != k2:
        raise ShapeError("conv2d kernels must be square")
    if xb.shape[1] != in_ch:
        raise ShapeError(f"conv2d input has {xb.shape[1]} channels, kernels expect {in_ch}")

    if padding not in ("valid", "same"):
        raise ValueError(f"unknown padding {padding!r}")
    pad = 0 if padding == "valid" else _pad_same_2d(k)
    xp = np.pad(xb.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else xb.data
    if xp.shape[2] < k or xp.shape[3] < k:
        raise ShapeError(f"kernel {k}x{k} larger than padded input {xp.shape[2]}x{xp.shape[3]}")

    windows = sliding_window_view(xp, (k, k), axis=(2, 3))
    y = np.einsum("bchwij,ocij->bohw", windows, kernels.data, optimize=True)
    if bias is not None:
        y = y + bias.data[None, :, None, None]

    parents = (xb, kernels) if bias is None else (xb, kernels, bias)
    out = Tensor(y, parents)

    def backward(g):
        kernels.accumulate_grad(np.einsum("bchwij,bohw->ocij", windows, g, optimize=True))
        if bias is not None:
            bias.accumulate_grad(g.sum(axis=(0, 2, 3)))
        gp = np.pad(g, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
        gwin = sliding_window_view(gp, (k, k), axis=(2, 3))
        rot = kernels.data[:, :, ::-1, ::-1]
        dxp = np.einsum("bohwij,ocij->bchw", gwin, rot, optimize=True)
        if pad:
            dxp = dxp[:, :, pad:-pad, pad:-pad]
        xb.accumulate_grad(dxp)

    out._backward = backward
    return _drop_batch(out, had_batch)


def depthwise_conv2d(x: Tensor, kernels: Tensor, padding: str = "valid") -> Tensor:
    """Per-channel 2D cross-correlation, no channel mixing. kernels: (C,k,k)."""
    xb, had_batch = _with_batch(x, 3)
    channels, k, k2 = kernels.shape
    if k != k2:
        raise ShapeError("depthwise kernels must be square")
    if xb.shape[1] != channels:
        raise ShapeError(f"depthwise input has {xb.shape[1]} channels, kernels expect {channels}")

    if padding not in ("valid", "same"):
        raise ValueError(f"unknown padding {padding!r}")
    pad = 0 if padding == "valid" else _pad_same_2d(k)
    xp = np.pad(xb.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else xb.data
    if xp.shape[2] < k or xp.shape[3] < k:
        raise ShapeError(f"kernel {k}x{k} larger than padded input {xp.shape[2]}x{xp.shape[3]}")

    windows = sliding_window_view(xp, (k, k), axis=(2, 3))
    y = np.einsum("bchwij,cij->bchw", windows, kernels.data, optimize=True)
    out = Tensor(y, (xb, kernels))

    def backward(g):
        kernels.accumulate_grad(np.einsum("bchwij,bchw->cij", windows, g, optimize=True))
        gp = np.pad(g, ((0, 0), (0, 0), (k - 1, k - 1), (k - 1, k - 1)))
        gwin = sliding_window_view(gp, (k, k), axis=(2, 3))
        rot = kernels.data[:, ::-1, ::-1]
        dxp = np.einsum("bchwij,cij->bchw", gwin, rot, optimize=True)
        if pad:
            dxp = dxp[:, :, pad:-pad, pad:-pad]
        xb.accumulate_grad(dxp)

    out._backward = backward
    return _drop_batch(out, had_batch)


def pointwise_conv2d(x: Tensor, kernels: Tensor) -> Tensor:
    """1x1 cross-channel convolution. kernels: (O,C,1,1) or (O,C)."""
    xb, had_batch = _with_batch(x, 3)
    if kernels.ndim == 4:
        if kernels.shape[2:] != (1, 1):
            raise ShapeError("pointwise kernels must be 1x1")
        w = kernels.data[:, :, 0, 0]
    elif kernels.ndim == 2:
        w = kernels.data
    else:
        raise ShapeError("pointwise kernels must be rank 2 or 4")
    if xb.shape[1] != w.shape[1]:
        raise ShapeError(f"pointwise input has {xb.shape[1]} channels, kernels expect {w.shape[1]}")

    y = np.einsum("bchw,oc->bohw", xb.data, w, optimize=True)
    out = Tensor(y, (xb, kernels))

    def backward(g):
        dw = np.einsum("bohw,bchw->oc", g, xb.data, optimize=True)
        kernels.accumulate_grad(dw.reshape(kernels.shape))
        xb.accumulate_grad(np.einsum("bohw,oc->bchw", g, w, optimize=True))

    out._backward = backward
    return _drop_batch(out, had_batch)


def conv3d(x: Tensor, kernels: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """3D valid cross-correlation. x: (B,C,D,H,W) or (C,D,H,W); kernels: (O,C,k,k,k)."""
    xb, had_batch = _with_batch(x, 4)
    out_ch, in_ch, k, k2, k3 = kernels.shape
    if not (k == k2 == k3):
        raise ShapeError("conv3d kernels must be cubic")
    if xb.shape[1] != in_ch:
        raise ShapeError(f"conv3d input has {xb.shape[1]} channels, kernels expect {in_ch}")
    if min(xb.shape[2:]) < k:
        raise ShapeError(f"kernel {k} larger than a spatial extent of {xb.shape[2:]}")

    windows = sliding_window_view(xb.data, (k, k, k), axis=(2, 3, 4))
    y = np.einsum("bcdhwijl,ocijl->bodhw", windows, kernels.data, optimize=True)
    if bias is not None:
        y = y + bias.data[None, :, None, None, None]

    parents = (xb, kernels) if bias is None else (xb, kernels, bias)
    out = Tensor(y, parents)

    def backward(g):
        kernels.accumulate_grad(np.einsum("bcdhwijl,bodhw->ocijl", windows, g, optimize=True))
        if bias is not None:
            bias.accumulate_grad(g.sum(axis=(0, 2, 3, 4)))
        p = k - 1
        gp = np.pad(g, ((0, 0), (0, 0), (p, p), (p, p), (p, p)))
        gwin = sliding_window_view(gp, (k, k, k), axis=(2, 3, 4))
        rot = kernels.data[:, :, ::-1, ::-1, ::-1]
        xb.accumulate_grad(np.einsum("bodhwijl,ocijl->bcdhw", gwin, rot, optimize=True))

    out._backward = backward
    return _drop_batch(out, had_batch)


def transposed_conv2d(x: Tensor, kernels: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Stride-2 transposed convolution with a 2x2 kernel: exact 2x upscaling.

    Each input pixel scatters kernel*value into its own 2x2 output block;
    blocks tile without overlap. kernels: (C_in, C_out, 2, 2).
    """
    xb, had_batch = _with_batch(x, 3)
    in_ch, out_ch, k, k2 = kernels.shape
    if (k, k2) != (2, 2):
        raise ShapeError("transposed_conv2d kernels must be 2x2")
    if xb.shape[1] != in_ch:
        raise ShapeError(f"transposed input has {xb.shape[1]} channels, kernels expect {in_ch}")

    b, _, h, w = xb.shape
    blocks = np.einsum("bchw,coij->bohwij", xb.data, kernels.data, optimize=True)
    y = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(b, out_ch, 2 * h, 2 * w)
    if bias is not None:
        y = y + bias.data[None, :, None, None]

    parents = (xb, kernels) if bias is None else (xb, kernels, bias)
    out = Tensor(y, parents)

    def backward(g):
        gblocks = g.reshape(b, out_ch, h, 2, w, 2).transpose(0, 1, 2, 4, 3, 5)
        kernels.accumulate_grad(np.einsum("bchw,bohwij->coij", xb.data, gblocks, optimize=True))
        if bias is not None:
            bias.accumulate_grad(g.sum(axis=(0, 2, 3)))
        xb.accumulate_grad(np.einsum("bohwij,coij->bchw", gblocks, kernels.data, optimize=True))

    out._backward = backward
    return _drop_batch(out, had_batch)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor,
               running_mean: np.ndarray, running_var: np.ndarray,
               training: bool, momentum: float = BATCHNORM_MOMENTUM,
               eps: float = BATCHNORM_EPS) -> Tensor:
    """Per-channel normalization over batch and spatial axes (channel axis 1).

    Train mode normalizes with batch statistics and updates the running
    statistics in place; eval mode uses the running statistics only.
    Population (biased) variance is used throughout so that converged
    running statistics reproduce train-mode outputs exactly.
    """
    if x.ndim < 2:
        raise ShapeError("batch_norm input must have a channel axis (rank >= 2)")
    channels = x.shape[1]
    if gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError("gamma/beta length must equal the channel count")
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, channels) + (1,) * (x.ndim - 2)

    if training:
        if x.shape[0] < 2:
            raise ValueError("batch_norm train mode requires batch size >= 2")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var
    else:
        mu = running_mean
        var = running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(bshape)) * inv_std.reshape(bshape)
    y = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)
    out = Tensor(y, (x, gamma, beta))
    n = x.size // channels

    def backward(g):
        gamma.accumulate_grad((g * xhat).sum(axis=axes))
        beta.accumulate_grad(g.sum(axis=axes))
        dxhat = g * gamma.data.reshape(bshape)
        if training:
            mean_dxhat = dxhat.mean(axis=axes).reshape(bshape)
            mean_dxhat_xhat = (dxhat * xhat).mean(axis=axes).reshape(bshape)
            dx = (dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * inv_std.reshape(bshape)
        else:
            dx = dxhat * inv_std.reshape(bshape)
        x.accumulate_grad(dx)

    out._backward = backward
    return out


# -- layer classes ------------------------------------------------------------


class Conv2d:
    """Standard 2D convolution with per-output-channel bias, stride 1."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 padding: str = "valid", rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng()
        k = kernel_size
        self.padding = padding
        self.kernels = glorot_uniform(rng, (out_channels, in_channels, k, k),
                                      in_channels * k * k, out_channels * k * k)
        self.bias = Tensor(np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.kernels, self.bias, self.padding)

    def parameters(self):
        return [("kernels", self.kernels), ("bias", self.bias)]


class Conv3d:
    """Standard 3D convolution with bias, valid padding, stride 1."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng()
        k = kernel_size
        self.kernels = glorot_uniform(rng, (out_channels, in_channels, k, k, k),
                                      in_channels * k ** 3, out_channels * k ** 3)
        self.bias = Tensor(np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        return conv3d(x, self.kernels, self.bias)

    def parameters(self):
        return [("kernels", self.kernels), ("bias", self.bias)]


class TransposedConv2d:
    """2x2 stride-2 transposed convolution: doubles both spatial extents."""

    def __init__(self, in_channels: int, out_channels: int,
                 rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng()
        self.kernels = glorot_uniform(rng, (in_channels, out_channels, 2, 2),
                                      in_channels * 4, out_channels * 4)
        self.bias = Tensor(np.zeros(out_channels))

    def __call__(self, x: Tensor) -> Tensor:
        return transposed_conv2d(x, self.kernels, self.bias)

    def parameters(self):
        return [("kernels", self.kernels), ("bias", self.bias)]


class BatchNorm:
    """Batch normalization with running statistics for inference."""

    def __init__(self, channels: int, momentum: float = BATCHNORM_MOMENTUM,
                 eps: float = BATCHNORM_EPS):
        self.gamma = Tensor(np.ones(channels))
        self.beta = Tensor(np.zeros(channels))
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.momentum = momentum
        self.eps = eps
        self.training = True

    def __call__(self, x: Tensor) -> Tensor:
        return batch_norm(x, self.gamma, self.beta, self.running_mean,
                          self.running_var, self.training, self.momentum, self.eps)

    def parameters(self):
        return [("gamma", self.gamma), ("beta", self.beta)]

    def state(self):
        """Non-trainable inference statistics (serialized but never counted)."""
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


class Dense:
    """Fully connected layer: W x + b over the last axis."""

    def __init__(self, in_units: int, out_units: int,
                 rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng()
        self.weights = glorot_uniform(rng, (out_units, in_units), in_units, out_units)
        self.bias = Tensor(np.zeros(out_units))

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.weights, self.bias)

    def parameters(self):
        return [("weights", self.weights), ("bias", self.bias)]


class DepthwiseSeparableConv:
    """Depthwise 3x3 + pointwise 1x1 (both bias-free) + batch norm + ReLU.

    Channel multiplier is fixed at 1, so the depthwise stage preserves the
    channel count and the block costs C_in*k^2 + C_in*C_out kernel weights
    against C_out*C_in*k^2 for the standard convolution it replaces.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 padding: str = "valid", rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng()
        k = kernel_size
        self.padding = padding
        self.depthwise = glorot_uniform(rng, (in_channels, k, k), k * k, k * k)
        self.pointwise = glorot_uniform(rng, (out_channels, in_channels, 1, 1),
                                        in_channels, out_channels)
        self.bn = BatchNorm(out_channels)

    def __call__(self, x: Tensor) -> Tensor:
        y = depthwise_conv2d(x, self.depthwise, self.padding)
        y = pointwise_conv2d(y, self.pointwise)
        return self.bn(y).relu()

    def parameters(self):
        params = [("depthwise", self.depthwise), ("pointwise", self.pointwise)]
        params += [(f"bn.{n}", t) for n, t in self.bn.parameters()]
        return params


class AttentionAugmentation:
    """Single-head scaled dot-product attention over spatial positions.

    Treats the H*W positions of a (C,H,W) feature map as a sequence of
    channel vectors, projects them to queries/keys/values with dense
    layers, and concatenates the d_v attention output channels onto the
    input channels: (C,H,W) -> (C+d_v,H,W).
    """

    def __init__(self, channels: int, d_k: int = 4, d_v: int = 4,
                 rng: Optional[np.random.Generator] = None):
        if d_k < 1 or d_v < 1:
            raise ValueError("d_k and d_v must be >= 1")
        rng = rng or np.random.default_rng()
        self.d_k = d_k
        self.d_v = d_v
        self.query = Dense(channels, d_k, rng)
        self.key = Dense(channels, d_k, rng)
        self.value = Dense(channels, d_v, rng)

    def __call__(self, x: Tensor) -> Tensor:
        xb, had_batch = _with_batch(x, 3)
        b, c, h, w = xb.shape
        seq = xb.reshape((b, c, h * w)).permute((0, 2, 1))  # (B, P, C)
        q = self.query(seq)
        k = self.key(seq)
        v = self.value(seq)
        scores = q.bmm(k.permute((0, 2, 1))) * (1.0 / math.sqrt(self.d_k))
        att = softmax_last_axis(scores)
        o = att.bmm(v)  # (B, P, d_v)
        o = o.permute((0, 2, 1)).reshape((b, self.d_v, h, w))
        return _drop_batch(concat([xb, o], axis=1), had_batch)

    def attention_weights(self, x: Tensor) -> np.ndarray:
        """Attention matrix for inspection; rows sum to 1."""
        xb, _ = _with_batch(x, 3)
        b, c, h, w = xb.shape
        seq = xb.reshape((b, c, h * w)).permute((0, 2, 1))
        scores = self.query(seq).bmm(self.key(seq).permute((0, 2, 1))) * (1.0 / math.sqrt(self.d_k))
        return softmax_last_axis(scores).data

    def parameters(self):
        params = []
        for prefix, layer in (("query", self.query), ("key", self.key), ("value", self.value)):
            params += [(f"{prefix}.{n}", t) for n, t in layer.parameters()]
        return params
