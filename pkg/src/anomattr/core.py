"""Shared domain types: samples, test sets, reference sets, attribution vectors.

Everything here is immutable after construction and safe to share across
threads. No algorithms live in this module.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

METHODS = ("lc", "lime", "ig", "eig", "sv", "zscore")

# Shift-type scores live in input units and scale with the feature;
# gradient-type scores carry 1/unit and scale inversely. Increment-type
# scores (IG/EIG/SV) are in output units and are scale-invariant, as is
# the dimensionless Z-score.
SHIFT_METHODS = frozenset({"lc"})
GRADIENT_METHODS = frozenset({"lime"})


class AnomattrError(Exception):
    """Base class for all package errors."""


class DataError(AnomattrError):
    """Invalid or inconsistent input data."""


class ModelProtocolError(AnomattrError):
    """External model process failed or violated the wire protocol."""


class ConvergenceError(AnomattrError):
    """Optimizer diverged or was aborted."""


def _as_readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _require_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise DataError(f"{what} contains non-finite values")


@dataclass(frozen=True)
class Sample:
    """One observation: input vector x and observed target y."""

    x: np.ndarray
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", _as_readonly(np.atleast_1d(self.x)))
        object.__setattr__(self, "y", float(self.y))
        if self.x.ndim != 1 or self.x.size < 1:
            raise DataError("sample x must be a non-empty 1-D vector")
        _require_finite(self.x, "sample x")
        if not np.isfinite(self.y):
            raise DataError("sample y must be finite")

    @property
    def m(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class TestSet:
    """Ordered collection of samples with named features."""

    samples: tuple[Sample, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        if not self.samples:
            raise DataError("test set must contain at least one sample")
        m = self.samples[0].m
        if any(s.m != m for s in self.samples):
            raise DataError("all samples must share the same dimensionality")
        if len(self.names) != m:
            raise DataError(f"expected {m} feature names, got {len(self.names)}")
        if len(set(self.names)) != len(self.names):
            raise DataError("feature names must be unique")

    @property
    def m(self) -> int:
        return self.samples[0].m

    def __len__(self) -> int:
        return len(self.samples)

    def x_matrix(self) -> np.ndarray:
        return np.stack([s.x for s in self.samples])

    def y_vector(self) -> np.ndarray:
        return np.array([s.y for s in self.samples])

    @classmethod
    def from_arrays(cls, x, y, names: Sequence[str]) -> "TestSet":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if x.shape[0] != y.shape[0]:
            raise DataError("x and y row counts differ")
        return cls(tuple(Sample(xi, yi) for xi, yi in zip(x, y)), tuple(names))


@dataclass(frozen=True)
class ReferenceSet:
    """Empirical stand-in for the input distribution, or a held-out set.

    role is "baseline-distribution" for EIG/SV/Z-score references and
    "held-out" for variance estimation (y values required).
    """

    x: np.ndarray
    y: np.ndarray | None = None
    role: str = "baseline-distribution"

    def __post_init__(self):
        object.__setattr__(self, "x", _as_readonly(np.atleast_2d(self.x)))
        if self.y is not None:
            object.__setattr__(self, "y", _as_readonly(np.atleast_1d(self.y)))
        if self.x.shape[0] < 1:
            raise DataError("reference set must be non-empty")
        _require_finite(self.x, "reference x")
        if self.role not in ("baseline-distribution", "held-out"):
            raise DataError(f"unknown reference role: {self.role!r}")
        if self.y is not None:
            _require_finite(self.y, "reference y")
            if self.y.shape[0] != self.x.shape[0]:
                raise DataError("reference x and y row counts differ")
        if self.role == "held-out" and self.y is None:
            raise DataError("held-out reference set requires y values")

    @property
    def m(self) -> int:
        return self.x.shape[1]

    def __len__(self) -> int:
        return self.x.shape[0]

    def without_x(self, xt: np.ndarray) -> "ReferenceSet":
        """Drop points whose x matches xt bit for bit (leave-one-out)."""
        keep = ~np.all(self.x == np.asarray(xt, dtype=float), axis=1)
        if keep.all():
            return self
        if not keep.any():
            raise DataError("leave-one-out removed every held-out point")
        y = self.y[keep] if self.y is not None else None
        return ReferenceSet(self.x[keep], y, self.role)


@dataclass(frozen=True)
class GaussianPredictive:
    """Gaussian observation model N(y | f(x), sigma2) for one test point."""

    model: object  # ModelHandle; kept loose to avoid an import cycle
    sigma2: float

    def __post_init__(self):
        object.__setattr__(self, "sigma2", float(self.sigma2))
        if not (np.isfinite(self.sigma2) and self.sigma2 > 0):
            raise DataError("sigma2 must be strictly positive and finite")


@dataclass(frozen=True)
class AttributionVector:
    """Per-feature scores produced by one attribution method."""

    scores: np.ndarray
    method: str
    names: tuple[str, ...]
    meta: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "scores", _as_readonly(np.atleast_1d(self.scores)))
        object.__setattr__(self, "names", tuple(self.names))
        if self.method not in METHODS:
            raise DataError(f"unknown attribution method: {self.method!r}")
        if len(self.names) != self.scores.size:
            raise DataError("scores and names lengths differ")
        _require_finite(self.scores, "attribution scores")

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.scores)}


@dataclass(frozen=True)
class ScalingRecord:
    """Per-feature (mean, sd) used to standardize inputs and undo it later."""

    means: np.ndarray
    sds: np.ndarray
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "means", _as_readonly(self.means))
        object.__setattr__(self, "sds", _as_readonly(self.sds))
        object.__setattr__(self, "names", tuple(self.names))
        if self.means.shape != self.sds.shape or self.means.ndim != 1:
            raise DataError("means and sds must be 1-D and equally sized")
        if np.any(self.sds <= 0):
            raise DataError("scaling sds must be positive")

    @property
    def m(self) -> int:
        return self.means.size

    def apply_x(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.means) / self.sds

    def invert_x(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.sds + self.means


def standardize(ts: TestSet, ref: ReferenceSet) -> tuple[TestSet, ReferenceSet, ScalingRecord]:
    """Rescale features to zero mean, unit variance under ref statistics.

    Raises DataError naming the feature if any reference column has zero
    variance. Requires at least two reference points.
    """
    if ts.m != ref.m:
        raise DataError("test set and reference set dimensionality differ")
    if len(ref) < 2:
        raise DataError("standardization needs at least 2 reference points")
    means = ref.x.mean(axis=0)
    sds = ref.x.std(axis=0)  # population sd
    bad = np.flatnonzero(sds <= 0)
    if bad.size:
        raise DataError(f"zero variance in feature {ts.names[bad[0]]!r}")
    rec = ScalingRecord(means, sds, ts.names)
    new_ts = TestSet.from_arrays(rec.apply_x(ts.x_matrix()), ts.y_vector(), ts.names)
    new_ref = ReferenceSet(rec.apply_x(ref.x), ref.y, ref.role)
    return new_ts, new_ref, rec


def unstandardize(ts: TestSet, rec: ScalingRecord) -> TestSet:
    """Inverse of standardize on the inputs (y is untouched)."""
    return TestSet.from_arrays(rec.invert_x(ts.x_matrix()), ts.y_vector(), ts.names)


def unscale_attribution(a: AttributionVector, rec: ScalingRecord) -> AttributionVector:
    """Convert scores computed on standardized inputs back to input units.

    Shift-type scores (LC) multiply by sd; gradient-type scores (LIME)
    divide by sd; increment-type and dimensionless scores pass through.
    """
    if a.scores.size != rec.m:
        raise DataError("attribution and scaling record dimensionality differ")
    if a.method in SHIFT_METHODS:
        scores = a.scores * rec.sds
    elif a.method in GRADIENT_METHODS:
        scores = a.scores / rec.sds
    else:
        scores = a.scores
    meta = dict(a.meta)
    meta["rescaled"] = True
    return AttributionVector(scores, a.method, a.names, meta, dict(a.diagnostics))


def derive_seed(*parts) -> tuple[int, ...]:
    """Deterministic composite seed usable as numpy SeedSequence entropy."""
    out: list[int] = []
    for p in parts:
        if isinstance(p, (tuple, list)):
            out.extend(int(q) & 0xFFFFFFFF for q in p)
        else:
            out.append(int(p) & 0xFFFFFFFF)
    return tuple(out)


def rng_from(*parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(derive_seed(*parts)))
