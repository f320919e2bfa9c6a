"""Uniform access to black-box regression functions.

Every f(x) evaluation in the package goes through a ModelHandle: either a
builtin analytic function or a child process speaking the line-delimited
JSON protocol (hello / predict / shutdown). Results are cached on the
exact bit pattern of x, so repeated queries are bit-identical and cheap.
"""
from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from typing import Callable, Sequence

import numpy as np

from .core import DataError, ModelProtocolError


def _sinusoidal2d(params):
    def f(X):
        return 2.0 * np.cos(np.pi * X[:, 0]) * np.sin(np.pi * X[:, 1])

    return f, 2


def _linear(params):
    a = np.asarray(params["a"], dtype=float).ravel()
    b = float(params.get("b", 0.0))

    def f(X):
        return X @ a + b

    return f, a.size


def _quadratic(params):
    A = np.atleast_2d(np.asarray(params["A"], dtype=float))
    if A.shape[0] != A.shape[1]:
        raise DataError("quadratic A must be square")
    b = np.asarray(params.get("b", np.zeros(A.shape[0])), dtype=float).ravel()
    c = float(params.get("c", 0.0))
    if b.size != A.shape[0]:
        raise DataError("quadratic b length must match A")

    def f(X):
        return np.einsum("ni,ij,nj->n", X, A, X) + X @ b + c

    return f, A.shape[0]


def _additive_sine(params):
    a = np.asarray(params["a"], dtype=float).ravel()
    omega = np.asarray(params.get("omega", np.ones_like(a)), dtype=float).ravel()
    if omega.size != a.size:
        raise DataError("additive-sine omega length must match a")

    def f(X):
        return np.sin(X * omega) @ a

    return f, a.size


def _piecewise_step(params):
    t = np.asarray(params["thresholds"], dtype=float).ravel()
    hgt = np.asarray(params["heights"], dtype=float).ravel()
    if t.size != hgt.size:
        raise DataError("piecewise-step thresholds/heights length mismatch")

    def f(X):
        return (X > t) @ hgt

    return f, t.size


def _constant(params):
    c = float(params["c"])

    def f(X):
        return np.full(X.shape[0], c)

    return f, None


_BUILTINS: dict[str, Callable] = {
    "sinusoidal2d": _sinusoidal2d,
    "linear": _linear,
    "quadratic": _quadratic,
    "additive-sine": _additive_sine,
    "piecewise-step": _piecewise_step,
    "constant": _constant,
}


def builtin_names() -> tuple[str, ...]:
    return tuple(sorted(_BUILTINS))


class ModelHandle:
    """Queryable black-box f: R^M -> R with a bit-exact query cache.

    Thread safety: builtin evaluation is pure; the cache and the external
    protocol client are guarded by locks, so handles may be shared across
    worker threads.
    """

    def __init__(self, fn, m: int | None, kind: str, spec: dict, use_cache: bool = True):
        self._fn = fn
        self.m = m
        self.kind = kind
        self.spec = spec
        self._use_cache = use_cache
        self._cache: dict[bytes, float] = {}
        self._lock = threading.Lock()
        self._requests = 0
        self._evals = 0

    def eval(self, xs: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:
        """Evaluate a batch of inputs, preserving order.

        The cache is consulted first; only misses reach the underlying
        function. Returns a float array of the same length as xs.
        """
        X = np.atleast_2d(np.asarray(xs, dtype=float))
        if X.size and not np.all(np.isfinite(X)):
            raise DataError("model inputs must be finite")
        if self.m is not None and X.shape[1] != self.m:
            raise DataError(f"model expects {self.m} features, got {X.shape[1]}")
        n = X.shape[0]
        out = np.empty(n)
        with self._lock:
            self._requests += n
            if not self._use_cache:
                groups = {i: [i] for i in range(n)}
            else:
                groups: dict = {}
                for i in range(n):
                    key = X[i].tobytes()
                    hit = self._cache.get(key)
                    if hit is None:
                        groups.setdefault(key, []).append(i)
                    else:
                        out[i] = hit
            if groups:
                rows = [idxs[0] for idxs in groups.values()]
                try:
                    ys = np.asarray(self._fn(X[rows]), dtype=float).ravel()
                except ModelProtocolError as e:
                    raise ModelProtocolError(
                        f"{e} (batch indices {rows[0]}..{rows[-1]})") from e
                if ys.size != len(rows):
                    raise ModelProtocolError(
                        f"model returned {ys.size} values for {len(rows)} inputs")
                self._evals += len(rows)
                for idxs, yv in zip(groups.values(), ys):
                    for i in idxs:
                        out[i] = yv
                    if self._use_cache:
                        self._cache[X[idxs[0]].tobytes()] = float(yv)
        return out

    def eval_one(self, x) -> float:
        return float(self.eval(np.asarray(x, dtype=float)[None, :])[0])

    def stats(self) -> dict[str, int]:
        """Query counters: requests seen and underlying evaluations made."""
        with self._lock:
            return {"requests": self._requests, "evals": self._evals}

    def close(self):
        pass


def register_builtin(name: str, params: dict | None = None, use_cache: bool = True) -> ModelHandle:
    """Construct a handle for a named closed-form function."""
    if name not in _BUILTINS:
        raise DataError(f"unknown builtin model {name!r}; available: {', '.join(builtin_names())}")
    fn, m = _BUILTINS[name](params or {})
    return ModelHandle(fn, m, "builtin", {"name": name, "params": params or {}}, use_cache)


def offset_by(h: ModelHandle, c: float) -> ModelHandle:
    """Derived handle computing f(x) + c. Used to attribute deviations."""
    c = float(c)

    def f(X):
        return h.eval(X) + c

    return ModelHandle(f, h.m, h.kind, {"offset": c, "base": h.spec}, use_cache=False)


class _ExternalClient:
    """Serializing JSON-lines client for a child model process."""

    def __init__(self, cmd: str, timeout: float):
        self.cmd = cmd
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(
                shlex.split(cmd),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise ModelProtocolError(f"failed to spawn model process: {e}") from e
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        self._lock = threading.Lock()

    def _pump(self):
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        except ValueError:
            pass
        self._lines.put(None)  # EOF marker

    def _read_reply(self) -> dict:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise ModelProtocolError(f"model process timed out after {self.timeout}s")
        if line is None:
            code = self.proc.poll()
            raise ModelProtocolError(f"model process closed its output (exit code {code})")
        try:
            return json.loads(line)
        except json.JSONDecodeError as e:
            raise ModelProtocolError(f"malformed reply from model process: {line!r}") from e

    def request(self, obj: dict) -> dict:
        with self._lock:
            if self.proc.poll() is not None:
                raise ModelProtocolError(
                    f"model process exited with code {self.proc.returncode}")
            try:
                self.proc.stdin.write(json.dumps(obj) + "\n")
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                raise ModelProtocolError(f"model process pipe broken: {e}") from e
            return self._read_reply()

    def shutdown(self):
        try:
            with self._lock:
                if self.proc.poll() is None:
                    self.proc.stdin.write(json.dumps({"op": "shutdown"}) + "\n")
                    self.proc.stdin.flush()
                    self.proc.stdin.close()
            self.proc.wait(timeout=self.timeout)
        except Exception:
            self.proc.kill()


def connect_external(cmd: str, timeout: float = 30.0, use_cache: bool = True) -> ModelHandle:
    """Spawn an external model process and handshake for dimensionality.

    The child must answer {"op":"hello"} with {"op":"hello","m":M} and
    {"op":"predict","x":[[...]]} with {"op":"predict","y":[...]}, one JSON
    object per line on stdout.
    """
    client = _ExternalClient(cmd, timeout)
    reply = client.request({"op": "hello"})
    if reply.get("op") != "hello" or not isinstance(reply.get("m"), int) or reply["m"] < 1:
        client.shutdown()
        raise ModelProtocolError(f"bad handshake reply: {reply!r}")
    m = reply["m"]

    def f(X):
        xs = [[float(v) for v in row] for row in X]
        rep = client.request({"op": "predict", "x": xs})
        if rep.get("op") == "error":
            raise ModelProtocolError(f"model process reported: {rep.get('error')!r}")
        if rep.get("op") != "predict" or "y" not in rep:
            raise ModelProtocolError(f"bad predict reply: {rep!r}")
        ys = rep["y"]
        if not isinstance(ys, list) or len(ys) != len(xs):
            raise ModelProtocolError(
                f"model returned {len(ys) if isinstance(ys, list) else 'non-list'} "
                f"predictions for a batch of {len(xs)}")
        return np.asarray(ys, dtype=float)

    handle = ModelHandle(f, m, "external", {"cmd": cmd}, use_cache)
    handle.close = client.shutdown  # type: ignore[method-assign]
    return handle
