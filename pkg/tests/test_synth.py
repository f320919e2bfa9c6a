import numpy as np
import pytest

from anomattr import synth
from anomattr.core import DataError


def test_sinusoidal_uniform_box():
    names, X, y = synth.generate("sinusoidal2d-uniform", 100, seed=3)
    assert names == ("x1", "x2")
    assert X.shape == (100, 2)
    assert np.all(X >= -4.0) and np.all(X <= 4.0)


def test_noise_zero_exact_function():
    _, X, y = synth.generate("sinusoidal2d-uniform", 50, seed=1, noise_sd=0.0)
    expected = 2.0 * np.cos(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1])
    assert np.array_equal(y, expected)


def test_determinism():
    a = synth.generate("boston-like", 64, seed=9)
    b = synth.generate("boston-like", 64, seed=9)
    assert np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])
    c = synth.generate("boston-like", 64, seed=10)
    assert not np.array_equal(a[2], c[2])


def test_planted_outliers():
    _, X, y = synth.generate("boston-like", 40, seed=2, outliers=2)
    _, X0, y0 = synth.generate("boston-like", 40, seed=2, outliers=0)
    assert np.array_equal(X, X0)
    assert y[:2] - y0[:2] == pytest.approx(synth.OUTLIER_SHIFT * 1.0, abs=1e-9)
    assert np.array_equal(y[2:], y0[2:])


def test_boston_like_shape():
    names, X, y = synth.generate("boston-like", 10, seed=0)
    assert len(names) == 13 and X.shape == (10, 13)


def test_diabetes_like_shape():
    names, X, y = synth.generate("diabetes-like", 10, seed=0)
    assert len(names) == 10 and X.shape == (10, 10)


def test_unknown_generator():
    with pytest.raises(DataError, match="unknown generator"):
        synth.generate("nope", 10)


def test_bad_sizes():
    with pytest.raises(DataError):
        synth.generate("boston-like", 0)
    with pytest.raises(DataError):
        synth.generate("boston-like", 5, outliers=9)
