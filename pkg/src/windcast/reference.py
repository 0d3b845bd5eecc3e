"""Reference results and frozen regression values for the repro checks.

``REFERENCE_ERRORS`` holds the published benchmark table this project
reproduces: persistence rows are exact, parameter-free functions of the
data (tight tolerances), while the multidimensional-model rows are
stochastic training outcomes (checked as median-over-seeds upper bounds).

``FROZEN_PARAMETER_COUNTS`` are this implementation's analytic counts,
frozen as regression values. ``REFERENCE_PARAMETER_COUNTS`` are the
published counts; the published architecture is under-specified, so these
are reported side by side but never asserted equal.
"""

from __future__ import annotations

# averaged-over-target-cities errors per horizon (hours)
REFERENCE_ERRORS = {
    "denmark": {
        "persistence_mae": {6: 1.649, 12: 2.210, 18: 2.309, 24: 2.313},
        "persistence_mse": {6: 4.608, 12: 7.929, 18: 8.702, 24: 8.812},
        "multidim_mae": {6: 1.302, 12: 1.706, 18: 1.873, 24: 1.925},
        "persistence_rel_tol": 0.01,
    },
    "netherlands": {
        "persistence_mae": {1: 9.55, 2: 11.34, 3: 12.90, 4: 14.37},
        "persistence_mse": {1: 183.61, 2: 246.95, 3: 310.38, 4: 375.36},
        "multidim_mae": {1: 8.12, 2: 9.05, 3: 9.95, 4: 10.94},
        "persistence_rel_tol": 0.015,
    },
}

# median-over-seeds MAE upper bounds for the multidimensional model
# (reference value + 10%), at the horizons the acceptance gate pins down
MULTIDIM_MAE_BOUNDS = {
    "denmark": {6: 1.43, 24: 2.12},
    "netherlands": {2: 9.96, 3: 10.95},
}

ACCEPTANCE_SEEDS = (1, 2, 3)

# published totals for the five architectures (under-specified; reported only)
REFERENCE_PARAMETER_COUNTS = {
    "denmark": {
        "conv2d": 46115,
        "conv2d_attention": 47059,
        "conv2d_upscaling": 27974,
        "conv3d": 54749,
        "multidim": 37258,
    },
    "netherlands": {
        "conv2d": 112167,
        "conv2d_attention": 113367,
        "conv2d_upscaling": 77568,
        "conv3d": 200929,
        "multidim": 102832,
    },
}

# this implementation's analytic counts, frozen as regression values
FROZEN_PARAMETER_COUNTS = {
    "denmark": {
        "multidim": 33704,
        "conv2d": 18371,
        "conv2d_attention": 20815,
        "conv2d_upscaling": 67801,
        "conv3d": 16155,
    },
    "netherlands": {
        "multidim": 116290,
        "conv2d": 68615,
        "conv2d_attention": 77203,
        "conv2d_upscaling": 265105,
        "conv3d": 103711,
    },
}

INPUT_SHAPES = {"denmark": (5, 4, 4), "netherlands": (7, 6, 6)}
TARGET_COUNTS = {"denmark": 3, "netherlands": 7}
