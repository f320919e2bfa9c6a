"""Reproducible synthetic datasets for experiments and fixtures."""
from __future__ import annotations

import numpy as np

from .core import DataError, rng_from
from .models import register_builtin

OUTLIER_SHIFT = 8.0


def _sinusoidal2d_uniform(n: int, rng):
    X = rng.uniform(-4.0, 4.0, size=(n, 2))
    y = 2.0 * np.cos(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1])
    return ("x1", "x2"), X, y, 0.0


def _boston_like(n: int, rng):
    # 13 standardized-looking features; y ignores x8..x13 entirely.
    X = rng.normal(0.0, 1.0, size=(n, 13))
    y = (3.0 * X[:, 0] - 2.0 * X[:, 1] + X[:, 2] ** 2 + 1.5 * np.sin(X[:, 3])
         + 0.5 * X[:, 4] * X[:, 5] + X[:, 6])
    names = tuple(f"x{i + 1}" for i in range(13))
    return names, X, y, 1.0


def _diabetes_like(n: int, rng):
    X = rng.normal(0.0, 1.0, size=(n, 10))
    y = (2.0 * X[:, 0] + X[:, 1] - 1.5 * X[:, 2] + 0.8 * X[:, 3] * X[:, 4]
         + np.sin(X[:, 5]))
    names = tuple(f"x{i + 1}" for i in range(10))
    return names, X, y, 2.0


_GENERATORS = {
    "sinusoidal2d-uniform": _sinusoidal2d_uniform,
    "boston-like": _boston_like,
    "diabetes-like": _diabetes_like,
}


def generator_names() -> tuple[str, ...]:
    return tuple(sorted(_GENERATORS))


def generate(name: str, n: int, seed: int = 0, noise_sd: float | None = None,
             outliers: int = 0):
    """Draw a dataset from a registered generator.

    Returns (names, X, y). Gaussian observation noise uses the generator
    default unless noise_sd is given. The first `outliers` rows get their
    target shifted by +8 noise units to plant unambiguous anomalies.
    """
    if name not in _GENERATORS:
        raise DataError(
            f"unknown generator {name!r}; available: {', '.join(generator_names())}")
    if n < 1:
        raise DataError("n must be >= 1")
    rng = rng_from(seed, 0x5E)
    names, X, y, default_noise = _GENERATORS[name](n, rng)
    sd = default_noise if noise_sd is None else float(noise_sd)
    if sd < 0:
        raise DataError("noise sd must be non-negative")
    if sd > 0:
        y = y + rng.normal(0.0, sd, size=n)
    if outliers:
        if outliers > n:
            raise DataError("cannot plant more outliers than rows")
        y = y.copy()
        y[:outliers] += OUTLIER_SHIFT * max(sd, 1.0)
    return names, X, y


def sinusoidal_handle():
    """Handle for the 2-D sinusoidal regression surface used throughout."""
    return register_builtin("sinusoidal2d")
