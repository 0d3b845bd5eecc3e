"""Finite-difference verification of analytic gradients.

``gradcheck`` compares the gradients produced by a backward pass against
central finite differences of the same scalar function. It is used by the
test suite and by the self-check portion of the ``repro`` command.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import Tensor, zero_grads

DEFAULT_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1.0)


def gradcheck(
    fn: Callable[[], Tensor],
    wrt: Sequence[Tensor],
    step: float = DEFAULT_STEP,
    tolerance: float = DEFAULT_TOLERANCE,
    max_entries_per_tensor: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """Check d(fn)/d(wrt) against central differences; returns the worst error.

    ``fn`` must rebuild its graph from the ``wrt`` tensors on every call.
    When ``max_entries_per_tensor`` is set, only a random subset of entries
    per tensor is perturbed (used for whole-model checks where exhaustive
    perturbation would be too slow).

    Raises AssertionError when any entry exceeds ``tolerance``.
    """
    zero_grads(wrt)
    loss = fn()
    loss.backward()
    analytic = [None if t.grad is None else t.grad.copy() for t in wrt]

    if rng is None:
        rng = np.random.default_rng(0)

    worst = 0.0
    for t, grad in zip(wrt, analytic):
        flat = t.data.reshape(-1)
        n = flat.size
        if max_entries_per_tensor is not None and n > max_entries_per_tensor:
            indices = rng.choice(n, size=max_entries_per_tensor, replace=False)
        else:
            indices = range(n)
        for i in indices:
            original = flat[i]
            flat[i] = original + step
            f_plus = float(fn().data)
            flat[i] = original - step
            f_minus = float(fn().data)
            flat[i] = original
            numeric = (f_plus - f_minus) / (2.0 * step)
            a = 0.0 if grad is None else float(grad.reshape(-1)[i])
            err = relative_error(a, numeric)
            if err > worst:
                worst = err
            if err > tolerance:
                raise AssertionError(
                    f"gradient mismatch at tensor {t.shape} entry {i}: "
                    f"analytic {a:.6e}, numeric {numeric:.6e}, relative error {err:.3e}"
                )
    return worst
