"""Comparison attribution methods: local linear surrogate (LIME-style),
integrated gradients, expected integrated gradients, sampled Shapley
values, and the per-feature Z-score.

Conventions shared by all methods:
  * every estimator is deterministic given its config seed;
  * the model is only reached through a ModelHandle;
  * deviation_wrap() reruns a method against f(x) - y_t so tests can
    check that the score is unchanged by the observed target.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import AttributionVector, DataError, ReferenceSet, Sample, rng_from
from .gradest import GradientConfig, smooth_gradient, with_seed
from .models import ModelHandle, offset_by


@dataclass(frozen=True)
class LimeConfig:
    ns: int = 1000
    sigma_local: float = 0.3
    nu: float = 0.01
    seed: int = 0
    max_sweeps: int = 10_000
    tol: float = 1e-8

    def __post_init__(self):
        if self.ns < 3:
            raise DataError("ns must be at least 3")
        if not self.sigma_local > 0:
            raise DataError("sigma_local must be positive")
        if self.nu < 0:
            raise DataError("nu must be non-negative")


@dataclass(frozen=True)
class IgConfig:
    baseline_x: tuple[float, ...] = ()
    intervals: int = 100
    grad: GradientConfig = field(default_factory=lambda: GradientConfig(eta=0.05))

    def __post_init__(self):
        if self.intervals < 2:
            raise DataError("intervals must be >= 2")


@dataclass(frozen=True)
class SvConfig:
    mc_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.mc_samples < 1:
            raise DataError("mc_samples must be >= 1")


def _names(names, m: int) -> tuple[str, ...]:
    if names is None:
        return tuple(f"x{i + 1}" for i in range(m))
    return tuple(names)


def lasso_cd(X: np.ndarray, z: np.ndarray, nu: float,
             max_sweeps: int = 10_000, tol: float = 1e-8):
    """Cyclic coordinate descent for (1/N)||z - b0 - X b||^2 + nu ||b||_1.

    The intercept is unpenalized. Returns (beta, b0, sweeps).
    """
    n, m = X.shape
    col_sq = 2.0 * np.einsum("ij,ij->j", X, X) / n
    beta = np.zeros(m)
    b0 = float(z.mean())
    r = z - b0
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_step = 0.0
        for j in range(m):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            if old != 0.0:
                r += X[:, j] * old
            rho = 2.0 * float(X[:, j] @ r) / n
            new = np.sign(rho) * max(abs(rho) - nu, 0.0) / col_sq[j]
            beta[j] = new
            if new != 0.0:
                r -= X[:, j] * new
            max_step = max(max_step, abs(new - old))
        shift = float(r.mean())
        b0 += shift
        r -= shift
        max_step = max(max_step, abs(shift))
        if max_step < tol:
            break
    return beta, b0, sweeps


def lime_attribute(s: Sample, h: ModelHandle, cfg: LimeConfig,
                   names=None) -> AttributionVector:
    """Fit a sparse linear surrogate to the deviation f(x) - y around x_t."""
    m = s.m
    if cfg.ns < m + 2:
        raise DataError(f"LIME needs ns >= M+2 = {m + 2}, got {cfg.ns}")
    rng = rng_from(cfg.seed, 0x11E)
    X = s.x + rng.normal(0.0, cfg.sigma_local, size=(cfg.ns, m))
    z = h.eval(X) - s.y
    if cfg.nu == 0.0:
        design = np.column_stack([np.ones(cfg.ns), X])
        sol, _, rank, _ = np.linalg.lstsq(design, z, rcond=None)
        if rank < m + 1:
            warnings.warn("singular LIME design with nu=0; least-norm solution returned")
        beta, sweeps = sol[1:], 0
    else:
        beta, _, sweeps = lasso_cd(X, z, cfg.nu, cfg.max_sweeps, cfg.tol)
    meta = {"ns": cfg.ns, "sigma_local": cfg.sigma_local, "nu": cfg.nu, "seed": cfg.seed}
    return AttributionVector(beta, "lime", _names(names, m), meta, {"sweeps": sweeps})


def _path_gradients(h, x0: np.ndarray, xt: np.ndarray, cfg: IgConfig,
                    seed_parts: tuple[int, ...] = ()) -> np.ndarray:
    alphas = np.linspace(0.0, 1.0, cfg.intervals + 1)
    grads = np.empty((alphas.size, xt.size))
    for k, a in enumerate(alphas):
        point = x0 + (xt - x0) * a
        grads[k] = smooth_gradient(h, point, with_seed(cfg.grad, *seed_parts, k))
    return grads


def _ig_scores(s: Sample, h, x0: np.ndarray, cfg: IgConfig,
               seed_parts: tuple[int, ...] = ()) -> np.ndarray:
    grads = _path_gradients(h, x0, s.x, cfg, seed_parts)
    avg = np.trapezoid(grads, dx=1.0 / cfg.intervals, axis=0)
    return (s.x - x0) * avg


def ig_attribute(s: Sample, h: ModelHandle, cfg: IgConfig,
                 names=None) -> AttributionVector:
    """Trapezoidal integral of the smoothed gradient along the straight
    path from the baseline to x_t, times the displacement."""
    x0 = np.asarray(cfg.baseline_x, dtype=float)
    if x0.size != s.m:
        raise DataError(f"baseline has {x0.size} entries, expected {s.m}")
    scores = _ig_scores(s, h, x0, cfg)
    meta = {"baseline_x": tuple(map(float, x0)), "intervals": cfg.intervals}
    return AttributionVector(scores, "ig", _names(names, s.m), meta, {})


def eig_attribute(s: Sample, h: ModelHandle, ref: ReferenceSet, cfg: IgConfig,
                  names=None) -> AttributionVector:
    """Mean integrated gradient over baselines drawn from the reference set."""
    if ref.m != s.m:
        raise DataError("reference set dimensionality mismatch")
    n = len(ref)
    per_baseline = np.empty((n, s.m))
    for b in range(n):
        per_baseline[b] = _ig_scores(s, h, ref.x[b], cfg, seed_parts=(b,))
    scores = per_baseline.mean(axis=0)
    stderr = per_baseline.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(s.m)
    meta = {"n_baselines": n, "intervals": cfg.intervals}
    return AttributionVector(scores, "eig", _names(names, s.m), meta,
                             {"stderr": stderr, "per_baseline": per_baseline})


def sv_attribute(s: Sample, h: ModelHandle, ref: ReferenceSet, cfg: SvConfig,
                 names=None) -> AttributionVector:
    """Monte-Carlo Shapley values by permutation sampling.

    Each draw picks one permutation and one reference point; coordinates
    outside the growing coalition are taken jointly from that point, and
    the telescoping marginal contributions are accumulated per feature.
    """
    if ref.m != s.m:
        raise DataError("reference set dimensionality mismatch")
    m = s.m
    rng = rng_from(cfg.seed, 0x5A)
    contribs = np.empty((cfg.mc_samples, m))
    for d in range(cfg.mc_samples):
        perm = rng.permutation(m)
        w = ref.x[rng.integers(len(ref))]
        chain = np.tile(w, (m + 1, 1))
        for k, j in enumerate(perm):
            chain[k + 1:, j] = s.x[j]
        fv = h.eval(chain)
        contribs[d, perm] = np.diff(fv)
    scores = contribs.mean(axis=0)
    if cfg.mc_samples > 1:
        stderr = contribs.std(axis=0, ddof=1) / np.sqrt(cfg.mc_samples)
    else:
        stderr = np.zeros(m)
    return AttributionVector(scores, "sv", _names(names, m),
                             {"mc_samples": cfg.mc_samples, "seed": cfg.seed},
                             {"stderr": stderr})


def zscore_attribute(s: Sample, ref: ReferenceSet, names=None) -> AttributionVector:
    """Standardized deviation of each input from the reference mean."""
    if ref.m != s.m:
        raise DataError("reference set dimensionality mismatch")
    mean = ref.x.mean(axis=0)
    sd = ref.x.std(axis=0)
    bad = np.flatnonzero(sd <= 0)
    if bad.size:
        raise DataError(f"zero reference sd in feature index {bad[0]}")
    return AttributionVector((s.x - mean) / sd, "zscore", _names(names, s.m),
                             {"n_ref": len(ref)}, {})


def deviation_wrap(method: str, s: Sample, h: ModelHandle, *,
                   ref: ReferenceSet | None = None,
                   lime_cfg: LimeConfig | None = None,
                   ig_cfg: IgConfig | None = None,
                   sv_cfg: SvConfig | None = None,
                   names=None) -> AttributionVector:
    """Run a method against F(x) = f(x) - y_t instead of f.

    For IG/EIG/SV the result provably matches the plain-f run; the wrapper
    exists so that equality can be asserted directly.
    """
    F = offset_by(h, -s.y)
    if method == "ig":
        return ig_attribute(s, F, ig_cfg, names)
    if method == "eig":
        return eig_attribute(s, F, ref, ig_cfg, names)
    if method == "sv":
        return sv_attribute(s, F, ref, sv_cfg, names)
    if method == "lime":
        return lime_attribute(s, F, lime_cfg, names)
    raise DataError(f"deviation_wrap does not support method {method!r}")
