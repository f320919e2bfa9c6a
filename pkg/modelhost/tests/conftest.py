import sys
from pathlib import Path

import numpy as np
import pytest

from modelhost.hosting import train_and_save, write_csv_dataset


def synth_tabular(n, m=5, seed=0, noise=0.5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, m))
    y = 2.0 * X[:, 0] - X[:, 1] + 0.5 * X[:, 2] ** 2 + noise * rng.normal(size=n)
    names = [f"x{i + 1}" for i in range(m)]
    return names, X, y


@pytest.fixture(scope="session")
def trained_rf(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("rf")
    names, X, y = synth_tabular(250, seed=3)
    data = tmp / "data.csv"
    write_csv_dataset(data, names, X, y)
    model = tmp / "model.pkl"
    ho = tmp / "heldout.csv"
    meta = train_and_save(str(data), "rf", str(model), str(ho), seed=3)
    return {"model": model, "heldout": ho, "meta": meta, "m": 5}


def serve_cmd(model_path) -> str:
    return f"{sys.executable} -m modelhost.cli serve {model_path}"
