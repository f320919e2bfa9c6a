"""Fetch public benchmark datasets into the CSV layout the host trains on."""
from __future__ import annotations

import io
import urllib.request

import numpy as np

from .hosting import HostError, write_csv_dataset

BOSTON_URL = "http://lib.stat.cmu.edu/datasets/boston"
BOSTON_COLUMNS = ["CRIM", "ZN", "INDUS", "CHAS", "NOX", "RM", "AGE", "DIS",
                  "RAD", "TAX", "PTRATIO", "B", "LSTAT"]


def fetch_diabetes(out_csv: str) -> int:
    """Diabetes benchmark (bundled with scikit-learn; works offline)."""
    from sklearn.datasets import load_diabetes

    d = load_diabetes()
    write_csv_dataset(out_csv, list(d.feature_names), d.data, d.target)
    return d.data.shape[0]


def fetch_california(out_csv: str) -> int:
    """California housing benchmark (downloads on first use)."""
    from sklearn.datasets import fetch_california_housing

    d = fetch_california_housing()
    write_csv_dataset(out_csv, list(d.feature_names), d.data, d.target)
    return d.data.shape[0]


def fetch_boston(out_csv: str) -> int:
    """Historic Boston housing data; drops the ethically flagged 'B' column."""
    try:
        with urllib.request.urlopen(BOSTON_URL, timeout=60) as resp:
            raw = resp.read().decode("utf-8")
    except OSError as e:
        raise HostError(f"could not download the Boston dataset: {e}") from e
    body = raw.split("\n", 22)[22]  # header prose precedes the data block
    values = np.loadtxt(io.StringIO(body)).reshape(-1, 14)
    X, y = values[:, :13], values[:, 13]
    keep = [i for i, c in enumerate(BOSTON_COLUMNS) if c != "B"]
    write_csv_dataset(out_csv, [BOSTON_COLUMNS[i] for i in keep], X[:, keep], y)
    return X.shape[0]


FETCHERS = {
    "diabetes": fetch_diabetes,
    "california": fetch_california,
    "boston": fetch_boston,
}
