import numpy as np
import pytest

import anomattr as A


@pytest.fixture
def affine2d():
    return A.register_builtin("linear", {"a": [2.0, -1.0], "b": 0.5})


@pytest.fixture
def quad2d():
    return A.register_builtin(
        "quadratic", {"A": [[0.5, 0.2], [0.2, -0.3]], "b": [1.0, -0.5], "c": 0.3})


@pytest.fixture
def sin2d():
    return A.register_builtin("sinusoidal2d")


@pytest.fixture
def ref2d():
    rng = np.random.default_rng(171)
    return A.ReferenceSet(rng.normal(0.0, 1.0, size=(50, 2)))
