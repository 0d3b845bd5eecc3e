"""Dense float64 tensors with reverse-mode automatic differentiation.

Every operation records its inputs and a backward closure on the output
tensor; ``Tensor.backward()`` walks the recorded graph once in reverse
topological order and accumulates gradients into ``.grad``. The graph is
rebuilt on every forward pass and garbage-collected with the loss tensor,
so no state leaks between training steps.

There is no implicit broadcasting: binary elementwise operations require
equal shapes. Bias addition and similar broadcast patterns are handled
inside the layer operations, not here.
"""

from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes do not satisfy an operation's contract."""


def _as_f64(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    return arr


class Tensor:
    """A dense float64 array plus the graph edge that produced it.

    Leaf tensors (parameters, inputs) are created directly from data.
    Non-leaf tensors carry ``_parents`` and a ``_backward`` closure that
    routes the incoming gradient to each parent.
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, _parents: tuple = (), _backward: Optional[Callable] = None):
        self.data = _as_f64(data)
        self.grad: Optional[np.ndarray] = None
        self._parents = _parents
        self._backward = _backward

    # -- bookkeeping ---------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + g

    def zero_grad(self) -> None:
        self.grad = None

    # -- elementwise ---------------------------------------------------

    def _check_same_shape(self, other: "Tensor") -> None:
        if self.shape != other.shape:
            raise ShapeError(f"elementwise operands differ in shape: {self.shape} vs {other.shape}")

    def __add__(self, other: "Tensor") -> "Tensor":
        self._check_same_shape(other)
        out = Tensor(self.data + other.data, (self, other))

        def backward(g):
            self.accumulate_grad(g)
            other.accumulate_grad(g)

        out._backward = backward
        return out

    def __sub__(self, other: "Tensor") -> "Tensor":
        self._check_same_shape(other)
        out = Tensor(self.data - other.data, (self, other))

        def backward(g):
            self.accumulate_grad(g)
            other.accumulate_grad(-g)

        out._backward = backward
        return out

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, (int, float)):
            return self.scale(float(other))
        self._check_same_shape(other)
        out = Tensor(self.data * other.data, (self, other))

        def backward(g):
            self.accumulate_grad(g * other.data)
            other.accumulate_grad(g * self.data)

        out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Tensor":
        if not isinstance(scalar, (int, float)):
            raise TypeError("tensor division is only defined by a scalar")
        if scalar == 0:
            raise ValueError("division by zero scalar")
        return self.scale(1.0 / float(scalar))

    def __neg__(self) -> "Tensor":
        return self.scale(-1.0)

    def scale(self, s: float) -> "Tensor":
        out = Tensor(self.data * s, (self,))

        def backward(g):
            self.accumulate_grad(g * s)

        out._backward = backward
        return out

    def relu(self) -> "Tensor":
        # subgradient at exactly 0 is 0, which keeps gradient checks deterministic
        mask = self.data > 0
        out = Tensor(np.where(mask, self.data, 0.0), (self,))

        def backward(g):
            self.accumulate_grad(g * mask)

        out._backward = backward
        return out

    # -- linear algebra ------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        if self.ndim != 2 or other.ndim != 2:
            raise ShapeError("matmul requires two rank-2 tensors")
        if self.shape[1] != other.shape[0]:
            raise ShapeError(f"matmul inner dimensions differ: {self.shape} vs {other.shape}")
        out = Tensor(self.data @ other.data, (self, other))

        def backward(g):
            self.accumulate_grad(g @ other.data.T)
            other.accumulate_grad(self.data.T @ g)

        out._backward = backward
        return out

    __matmul__ = matmul

    def bmm(self, other: "Tensor") -> "Tensor":
        """Batched matmul: (b,m,k) @ (b,k,n) -> (b,m,n)."""
        if self.ndim != 3 or other.ndim != 3:
            raise ShapeError("bmm requires two rank-3 tensors")
        if self.shape[0] != other.shape[0] or self.shape[2] != other.shape[1]:
            raise ShapeError(f"bmm shapes incompatible: {self.shape} vs {other.shape}")
        out = Tensor(self.data @ other.data, (self, other))

        def backward(g):
            self.accumulate_grad(g @ other.data.transpose(0, 2, 1))
            other.accumulate_grad(self.data.transpose(0, 2, 1) @ g)

        out._backward = backward
        return out

    # -- shape algebra ---------------------------------------------------

    def permute(self, axes: Sequence[int]) -> "Tensor":
        axes = tuple(axes)
        if sorted(axes) != list(range(self.ndim)):
            raise ValueError(f"axes {axes} is not a permutation of 0..{self.ndim - 1}")
        inverse = tuple(np.argsort(axes))
        out = Tensor(self.data.transpose(axes), (self,))

        def backward(g):
            self.accumulate_grad(g.transpose(inverse))

        out._backward = backward
        return out

    def reshape(self, shape) -> "Tensor":
        src_shape = self.shape
        out = Tensor(self.data.reshape(shape), (self,))

        def backward(g):
            self.accumulate_grad(g.reshape(src_shape))

        out._backward = backward
        return out

    def flatten(self) -> "Tensor":
        """Row-major linearization to rank 1."""
        return self.reshape((self.size,))

    # -- reductions ------------------------------------------------------

    def sum(self) -> "Tensor":
        out = Tensor(self.data.sum(), (self,))

        def backward(g):
            self.accumulate_grad(np.broadcast_to(g, self.shape))

        out._backward = backward
        return out

    def mean(self) -> "Tensor":
        n = self.size
        out = Tensor(self.data.mean(), (self,))

        def backward(g):
            self.accumulate_grad(np.broadcast_to(g / n, self.shape))

        out._backward = backward
        return out

    # -- autodiff driver -------------------------------------------------

    def backward(self) -> None:
        """Propagate gradients from a scalar loss to every reachable tensor.

        Leaves that are not reachable from this node keep whatever gradient
        they already hold (``None`` counts as zero).
        """
        if self.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.shape}")

        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)
            if node._parents:
                # intermediate gradients are not needed once propagated
                node.grad = None if node is not self else node.grad


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along ``axis``; gradient splits back by offsets."""
    ts = list(tensors)
    if not ts:
        raise ValueError("concat requires at least one tensor")
    rank = ts[0].ndim
    if not -rank <= axis < rank:
        raise ValueError(f"axis {axis} out of range for rank {rank}")
    axis = axis % rank
    for t in ts[1:]:
        if t.ndim != rank:
            raise ShapeError("concat inputs must share rank")
        for ax in range(rank):
            if ax != axis and t.shape[ax] != ts[0].shape[ax]:
                raise ShapeError(
                    f"concat inputs disagree on extent of axis {ax}: {t.shape} vs {ts[0].shape}"
                )
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis), tuple(ts))
    extents = [t.shape[axis] for t in ts]
    offsets = np.cumsum([0] + extents)

    def backward(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            index = [slice(None)] * rank
            index[axis] = slice(lo, hi)
            t.accumulate_grad(g[tuple(index)])

    out._backward = backward
    return out


def linear(x: Tensor, weights: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map over the last axis: (..., n_in) x (n_out, n_in) -> (..., n_out)."""
    if weights.ndim != 2:
        raise ShapeError("linear weights must be rank 2 (n_out, n_in)")
    if x.shape[-1] != weights.shape[1]:
        raise ShapeError(f"linear input width {x.shape[-1]} != weight fan-in {weights.shape[1]}")
    if bias is not None and bias.shape != (weights.shape[0],):
        raise ShapeError("linear bias length must equal n_out")
    y = x.data @ weights.data.T
    if bias is not None:
        y = y + bias.data
    parents = (x, weights) if bias is None else (x, weights, bias)
    out = Tensor(y, parents)
    x2 = x.data.reshape(-1, x.shape[-1])

    def backward(g):
        g2 = g.reshape(-1, weights.shape[0])
        x.accumulate_grad((g2 @ weights.data).reshape(x.shape))
        weights.accumulate_grad(g2.T @ x2)
        if bias is not None:
            bias.accumulate_grad(g2.sum(axis=0))

    out._backward = backward
    return out


def softmax_last_axis(x: Tensor) -> Tensor:
    """Numerically stable softmax over the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, (x,))

    def backward(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        x.accumulate_grad((g - dot) * s)

    out._backward = backward
    return out


def zero_grads(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.zero_grad()
