"""Consistency metrics, bootstrap score-variability study, and KDE.

The rank correlations are computed on absolute scores. Both are written
as explicit O(M^2)/rank computations (M is small here) so that the test
suite can check them against brute-force oracles bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DataError, ReferenceSet, Sample, derive_seed
from .baselines import (IgConfig, LimeConfig, SvConfig, eig_attribute,
                        ig_attribute, lime_attribute, sv_attribute,
                        zscore_attribute)

KDE_BANDWIDTH_FRACTION = 0.04
KDE_BANDWIDTH_FLOOR = 1e-6


def kendall_tau(a, b) -> float:
    """Tie-corrected (tau-b) rank correlation of |a| and |b|."""
    x, y = _abs_pair(a, b)
    n = x.size
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, 1)
    px, py = sx[iu], sy[iu]
    num = float(np.sum(px * py))
    n0 = px.size
    tx = int(np.sum(px == 0))
    ty = int(np.sum(py == 0))
    den = math.sqrt(float((n0 - tx) * (n0 - ty)))
    return num / den if den > 0 else 0.0


def spearman_rho(a, b) -> float:
    """Rank correlation with average ranks for ties, on |a| and |b|."""
    x, y = _abs_pair(a, b)
    ra, rb = _average_ranks(x), _average_ranks(y)
    n = ra.size
    mean = (n + 1) / 2.0
    da, db = ra - mean, rb - mean
    num = float(da @ db)
    den = math.sqrt(float(da @ da) * float(db @ db))
    return num / den if den > 0 else 0.0


def _abs_pair(a, b):
    x = np.abs(np.asarray(a, dtype=float))
    y = np.abs(np.asarray(b, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("inputs must be 1-D vectors of equal length")
    if x.size < 2:
        raise DataError("rank correlation needs at least 2 entries")
    return x, y


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def sign_match_ratio(r, u) -> float:
    """Fraction of features whose signs do not outright disagree.

    sign(0) counts as 0, so zero entries in either vector never count as
    mismatches; an all-zero reference always scores 1.
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if r.shape != u.shape:
        raise DataError("vectors must have equal length")
    mismatch = np.sign(r) * np.sign(u) == -1
    return 1.0 - float(mismatch.sum()) / r.size


def top_quartile_indices(v) -> tuple[int, ...]:
    """Indices of the ceil(M/4) largest absolute entries, ties to the
    lower index."""
    v = np.asarray(v, dtype=float)
    k = math.ceil(v.size / 4)
    order = np.argsort(-np.abs(v), kind="stable")
    return tuple(int(i) for i in order[:k])


def hit25(r, u) -> float:
    """Overlap of the top-quartile absolute entries of u with those of r."""
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if r.shape != u.shape:
        raise DataError("vectors must have equal length")
    top_r = set(top_quartile_indices(r))
    top_u = set(top_quartile_indices(u))
    return len(top_r & top_u) / len(top_r)


@dataclass(frozen=True)
class ConsistencyReport:
    """The four agreement metrics of one score vector against a reference."""

    kendall_tau: float
    spearman_rho: float
    sign_match: float
    hit25: float

    def __post_init__(self):
        if not (-1.0 <= self.kendall_tau <= 1.0 and -1.0 <= self.spearman_rho <= 1.0):
            raise DataError("rank correlations must lie in [-1, 1]")
        if not (0.0 <= self.sign_match <= 1.0 and 0.0 <= self.hit25 <= 1.0):
            raise DataError("sign_match and hit25 must lie in [0, 1]")

    @classmethod
    def from_vectors(cls, r, u) -> "ConsistencyReport":
        return cls(kendall_tau(r, u), spearman_rho(r, u),
                   sign_match_ratio(r, u), hit25(r, u))

    def as_dict(self) -> dict[str, float]:
        return {"kendall_tau": self.kendall_tau, "spearman_rho": self.spearman_rho,
                "sign_match": self.sign_match, "hit25": self.hit25}


def consistency_metrics(r, u) -> dict[str, float]:
    return ConsistencyReport.from_vectors(r, u).as_dict()


def kde_density(values, bandwidth: float, query) -> np.ndarray | float:
    """Gaussian kernel density of the sample `values` at `query`."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DataError("kde needs at least one value")
    if not bandwidth > 0:
        raise DataError("bandwidth must be positive")
    q = np.atleast_1d(np.asarray(query, dtype=float))
    z = (q[:, None] - values[None, :]) / bandwidth
    dens = np.exp(-0.5 * z**2).sum(axis=1) / (values.size * bandwidth * math.sqrt(2 * math.pi))
    return dens if np.ndim(query) else float(dens[0])


def default_bandwidth(values) -> float:
    values = np.asarray(values, dtype=float)
    rng = float(values.max() - values.min()) if values.size else 0.0
    return max(KDE_BANDWIDTH_FRACTION * rng, KDE_BANDWIDTH_FLOOR)


@dataclass(frozen=True)
class ScoreDistribution:
    """Bootstrap attribution scores, one row per round, name-keyed columns."""

    names: tuple[str, ...]
    values: np.ndarray  # shape (rounds, M)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", v)
        if v.shape[1] != len(self.names):
            raise DataError("values width must match names")

    def bandwidths(self) -> np.ndarray:
        return np.array([default_bandwidth(col) for col in self.values.T])

    def kde_grid(self, points: int = 200):
        """Per-feature (grid, density) arrays spanning the score range
        padded by three bandwidths."""
        out = {}
        for j, name in enumerate(self.names):
            col = self.values[:, j]
            bw = default_bandwidth(col)
            lo, hi = col.min() - 3 * bw, col.max() + 3 * bw
            grid = np.linspace(lo, hi, points)
            out[name] = (grid, kde_density(col, bw, grid))
        return out


def bootstrap_variability(method: str, s: Sample, h, ref: ReferenceSet,
                          B: int, Nb: int, seed: int = 0, *,
                          lime_cfg: LimeConfig | None = None,
                          ig_cfg: IgConfig | None = None,
                          sv_cfg: SvConfig | None = None,
                          names=None) -> ScoreDistribution:
    """Rerun one method on B bootstrap resamples of the reference set.

    Reference-free methods (LIME, IG) are simply rerun B times at the
    shared seed, so their spread is exactly zero.
    """
    if B < 1 or Nb < 1:
        raise DataError("B and Nb must be >= 1")
    rows = []
    for b in range(B):
        rng = np.random.default_rng(np.random.SeedSequence(derive_seed(seed, b, 0xB007)))
        idx = rng.integers(0, len(ref), size=Nb)
        boot = ReferenceSet(ref.x[idx], ref.y[idx] if ref.y is not None else None, ref.role)
        if method == "eig":
            av = eig_attribute(s, h, boot, ig_cfg)
        elif method == "sv":
            av = sv_attribute(s, h, boot, sv_cfg)
        elif method == "zscore":
            av = zscore_attribute(s, boot)
        elif method == "lime":
            av = lime_attribute(s, h, lime_cfg)
        elif method == "ig":
            av = ig_attribute(s, h, ig_cfg)
        else:
            raise DataError(f"bootstrap_variability does not support {method!r}")
        rows.append(av.scores)
    dist_names = tuple(names) if names is not None else av.names
    return ScoreDistribution(dist_names, np.stack(rows))


@dataclass(frozen=True)
class OracleCheck:
    name: str
    fixture: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


def theorem_oracle_suite(fixtures, seed: int = 0) -> list[OracleCheck]:
    """Run the analytical-property checks on a set of fixtures.

    Each fixture is (label, handle, sample, reference). Checks cover the
    increment sum rules, Shapley efficiency, the quadratic SV/EIG match,
    and the deviation-agnosticism equalities.
    """
    from .baselines import deviation_wrap

    checks: list[OracleCheck] = []
    for label, h, s, ref in fixtures:
        grad = _suite_grad(seed)
        igc = IgConfig(baseline_x=tuple(ref.x[0]), intervals=100, grad=grad)
        ig = ig_attribute(s, h, igc)
        f_t = h.eval_one(s.x)
        sum_resid = abs(float(ig.scores.sum()) - (f_t - h.eval_one(ref.x[0])))
        checks.append(OracleCheck("ig-sum-rule", label, sum_resid, 1e-3))

        eig = eig_attribute(s, h, ref, igc)
        ref_mean = float(h.eval(ref.x).mean())
        per_sums = eig.diagnostics["per_baseline"].sum(axis=1)
        se = float(per_sums.std(ddof=1) / np.sqrt(len(per_sums))) if len(per_sums) > 1 else 0.0
        eig_resid = abs(float(eig.scores.sum()) - (f_t - ref_mean))
        checks.append(OracleCheck("eig-sum-rule", label, eig_resid, max(3 * se, 1e-3)))

        svc = SvConfig(mc_samples=2000, seed=seed)
        sv = sv_attribute(s, h, ref, svc)
        f_ref = h.eval(ref.x)
        se_sum = float(f_ref.std(ddof=1) / np.sqrt(svc.mc_samples))
        sv_resid = abs(float(sv.scores.sum()) - (f_t - ref_mean))
        checks.append(OracleCheck("sv-efficiency", label, sv_resid, max(3 * se_sum, 1e-3)))

        wrapped_ig = deviation_wrap("ig", s, h, ig_cfg=igc)
        checks.append(OracleCheck(
            "ig-deviation-agnostic", label,
            float(np.max(np.abs(wrapped_ig.scores - ig.scores))), 1e-9))
        wrapped_sv = deviation_wrap("sv", s, h, ref=ref, sv_cfg=svc)
        checks.append(OracleCheck(
            "sv-deviation-agnostic", label,
            float(np.max(np.abs(wrapped_sv.scores - sv.scores))), 1e-9))
        lcfg = LimeConfig(ns=max(1000, s.m + 2), nu=0.01, seed=seed)
        beta = lime_attribute(s, h, lcfg).scores
        shifted = lime_attribute(Sample(s.x, s.y + 10.0), h, lcfg).scores
        checks.append(OracleCheck(
            "lime-deviation-agnostic", label,
            float(np.max(np.abs(beta - shifted))), 1e-9))
    return checks


def _suite_grad(seed: int) -> "GradientConfig":
    from .gradest import GradientConfig

    return GradientConfig(ns=100, eta=0.05, seed=seed)
