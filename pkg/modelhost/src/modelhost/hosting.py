"""Train scikit-learn regressors and serve them over the line protocol.

The host answers three requests, one JSON object per line on stdout:

    {"op":"hello"}                 -> {"op":"hello","m":M}
    {"op":"predict","x":[[...]]}   -> {"op":"predict","y":[...]}
    {"op":"shutdown"}              -> process exits 0

Malformed requests get {"op":"error","error":...} and the process stays
alive. Inference is single threaded and seeded, so predictions are
bit-reproducible across runs.
"""
from __future__ import annotations

import csv
import json
import pickle
import sys
from pathlib import Path

import numpy as np
from sklearn.compose import TransformedTargetRegressor
from sklearn.ensemble import GradientBoostingRegressor, RandomForestRegressor
from sklearn.neural_network import MLPRegressor
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import MinMaxScaler

MODEL_FORMAT_VERSION = 1
KINDS = ("rf", "gbt", "mlp")


class HostError(Exception):
    pass


def read_csv_dataset(path: str, target: str = "y"):
    p = Path(path)
    if not p.exists():
        raise HostError(f"file not found: {path}")
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise HostError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise HostError(f"{path}: no data rows")
    if target not in header:
        raise HostError(f"{path}: target column {target!r} not found")
    try:
        data = np.array([[float(c) for c in row] for row in rows])
    except ValueError as e:
        raise HostError(f"{path}: non-numeric cell ({e})") from None
    ycol = header.index(target)
    names = [h for k, h in enumerate(header) if k != ycol]
    X = np.delete(data, ycol, axis=1)
    return names, X, data[:, ycol]


def write_csv_dataset(path: str, names, X, y, target: str = "y"):
    lines = [",".join([*names, target])]
    for row, t in zip(X, y):
        lines.append(",".join([repr(float(v)) for v in row] + [repr(float(t))]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")


def build_estimator(kind: str, seed: int):
    # library defaults apart from seeding and single-threaded inference;
    # the mlp needs scaling and mild l2 to fit small noisy tabular data
    if kind == "rf":
        return RandomForestRegressor(random_state=seed, n_jobs=1)
    if kind == "gbt":
        return GradientBoostingRegressor(random_state=seed)
    if kind == "mlp":
        mlp = MLPRegressor(hidden_layer_sizes=(32, 8), activation="relu",
                           solver="adam", alpha=0.3, learning_rate_init=0.01,
                           max_iter=6000, random_state=seed)
        return TransformedTargetRegressor(
            regressor=make_pipeline(MinMaxScaler(), mlp),
            transformer=MinMaxScaler())
    raise HostError(f"unknown estimator kind {kind!r}; choose from {', '.join(KINDS)}")


def train_and_save(dataset_csv: str, kind: str, model_out: str,
                   heldout_out: str, holdout_frac: float = 0.2,
                   seed: int = 0, target: str = "y") -> dict:
    """Fit an estimator on a random split and persist model + held-out CSV.

    Returns the metadata dict that is also stored in the model file
    (estimator kind, dimensionality, library parameters, heldout R2).
    """
    if not 0.0 < holdout_frac < 1.0:
        raise HostError("holdout_frac must lie in (0, 1)")
    names, X, y = read_csv_dataset(dataset_csv, target)
    n = X.shape[0]
    n_ho = max(1, int(round(n * holdout_frac)))
    if n_ho >= n:
        raise HostError("holdout fraction leaves no training data")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    ho_idx, tr_idx = perm[:n_ho], perm[n_ho:]
    est = build_estimator(kind, seed)
    est.fit(X[tr_idx], y[tr_idx])
    r2 = float(est.score(X[ho_idx], y[ho_idx]))
    write_csv_dataset(heldout_out, names, X[ho_idx], y[ho_idx], target)
    meta = {
        "version": MODEL_FORMAT_VERSION,
        "kind": kind,
        "m": int(X.shape[1]),
        "feature_names": list(names),
        "target": target,
        "seed": int(seed),
        "holdout_frac": holdout_frac,
        "n_train": int(tr_idx.size),
        "n_heldout": int(ho_idx.size),
        "heldout_r2": r2,
        "params": {k: repr(v) for k, v in sorted(est.get_params(deep=False).items())},
    }
    with open(model_out, "wb") as fh:
        pickle.dump({"meta": meta, "estimator": est}, fh)
    return meta


def load_model(path: str):
    p = Path(path)
    if not p.exists():
        raise HostError(f"model file not found: {path}")
    with p.open("rb") as fh:
        blob = pickle.load(fh)
    if not isinstance(blob, dict) or "estimator" not in blob or "meta" not in blob:
        raise HostError(f"{path}: not a model-host model file")
    return blob["meta"], blob["estimator"]


def serve(model_path: str, stdin=None, stdout=None) -> int:
    """Request loop on stdin/stdout; returns the exit code."""
    meta, est = load_model(model_path)
    m = meta["m"]
    inp = stdin if stdin is not None else sys.stdin
    out = stdout if stdout is not None else sys.stdout

    def reply(obj):
        out.write(json.dumps(obj) + "\n")
        out.flush()

    for line in inp:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            reply({"op": "error", "error": "malformed json"})
            continue
        op = req.get("op") if isinstance(req, dict) else None
        if op == "hello":
            reply({"op": "hello", "m": m})
        elif op == "predict":
            try:
                X = np.asarray(req["x"], dtype=float)
                if X.ndim != 2 or X.shape[1] != m:
                    raise ValueError(f"expected shape (*, {m})")
                ys = est.predict(X)
                reply({"op": "predict", "y": [float(v) for v in ys]})
            except Exception as e:
                reply({"op": "error", "error": str(e)})
        elif op == "shutdown":
            return 0
        else:
            reply({"op": "error", "error": f"unknown op {op!r}"})
    return 0
