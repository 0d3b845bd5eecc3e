"""Nested-loop reference implementations of the convolution operations.

These are deliberately written as plain index arithmetic with no shared
code or vectorization tricks from the production layers; they exist so the
fast einsum-based forwards can be checked against an independent route,
both in the test suite and in the ``repro`` self-check.
"""

from __future__ import annotations

import numpy as np


def conv2d_reference(x: np.ndarray, kernels: np.ndarray, bias=None) -> np.ndarray:
    """Valid 2D cross-correlation. x: (C,H,W); kernels: (O,C,k,k)."""
    out_ch, in_ch, k, _ = kernels.shape
    _, h, w = x.shape
    out = np.zeros((out_ch, h - k + 1, w - k + 1))
    for o in range(out_ch):
        for i in range(h - k + 1):
            for j in range(w - k + 1):
                acc = 0.0
                for c in range(in_ch):
                    for p in range(k):
                        for q in range(k):
                            acc += x[c, i + p, j + q] * kernels[o, c, p, q]
                out[o, i, j] = acc + (0.0 if bias is None else bias[o])
    return out


def depthwise_reference(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Valid per-channel 2D cross-correlation. kernels: (C,k,k)."""
    channels, k, _ = kernels.shape
    _, h, w = x.shape
    out = np.zeros((channels, h - k + 1, w - k + 1))
    for c in range(channels):
        for i in range(h - k + 1):
            for j in range(w - k + 1):
                acc = 0.0
                for p in range(k):
                    for q in range(k):
                        acc += x[c, i + p, j + q] * kernels[c, p, q]
                out[c, i, j] = acc
    return out


def pointwise_reference(x: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-position channel mixing. x: (C,H,W); weights: (O,C)."""
    out_ch, in_ch = weights.shape
    _, h, w = x.shape
    out = np.zeros((out_ch, h, w))
    for i in range(h):
        for j in range(w):
            for o in range(out_ch):
                acc = 0.0
                for c in range(in_ch):
                    acc += weights[o, c] * x[c, i, j]
                out[o, i, j] = acc
    return out


def conv3d_reference(x: np.ndarray, kernels: np.ndarray, bias=None) -> np.ndarray:
    """Valid 3D cross-correlation. x: (C,D,H,W); kernels: (O,C,k,k,k)."""
    out_ch, in_ch, k, _, _ = kernels.shape
    _, d, h, w = x.shape
    out = np.zeros((out_ch, d - k + 1, h - k + 1, w - k + 1))
    for o in range(out_ch):
        for di in range(d - k + 1):
            for i in range(h - k + 1):
                for j in range(w - k + 1):
                    acc = 0.0
                    for c in range(in_ch):
                        for p in range(k):
                            for q in range(k):
                                for r in range(k):
                                    acc += x[c, di + p, i + q, j + r] * kernels[o, c, p, q, r]
                    out[o, di, i, j] = acc + (0.0 if bias is None else bias[o])
    return out


def transposed_conv2d_reference(x: np.ndarray, kernels: np.ndarray, bias=None) -> np.ndarray:
    """Stride-2 2x2 transposed convolution by explicit scattering.

    x: (C,H,W); kernels: (C,O,2,2); output (O,2H,2W).
    """
    in_ch, out_ch, _, _ = kernels.shape
    _, h, w = x.shape
    out = np.zeros((out_ch, 2 * h, 2 * w))
    for c in range(in_ch):
        for i in range(h):
            for j in range(w):
                for o in range(out_ch):
                    for p in range(2):
                        for q in range(2):
                            out[o, 2 * i + p, 2 * j + q] += x[c, i, j] * kernels[c, o, p, q]
    if bias is not None:
        for o in range(out_ch):
            out[o] += bias[o]
    return out


def strided_conv2x2_reference(y: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Adjoint of the stride-2 transposed convolution (a stride-2 2x2 conv).

    y: (O,2H,2W); kernels: (C,O,2,2); output (C,H,W). Used to state the
    adjoint identity <transposed(x), y> == <x, strided_conv(y)>.
    """
    in_ch, out_ch, _, _ = kernels.shape
    _, hh, ww = y.shape
    h, w = hh // 2, ww // 2
    out = np.zeros((in_ch, h, w))
    for c in range(in_ch):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for o in range(out_ch):
                    for p in range(2):
                        for q in range(2):
                            acc += y[o, 2 * i + p, 2 * j + q] * kernels[c, o, p, q]
                out[c, i, j] = acc
    return out


def matmul_reference(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop matrix product."""
    n, k = a.shape
    _, m = b.shape
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out
