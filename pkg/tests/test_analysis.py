import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import anomattr as A
from anomattr.analysis import (OracleCheck, ScoreDistribution, default_bandwidth,
                               hit25, kde_density, kendall_tau, sign_match_ratio,
                               spearman_rho, theorem_oracle_suite,
                               top_quartile_indices)
from anomattr.core import DataError


# ---------------------------------------------------------------- oracles

def brute_force_tau(a, b):
    """O(M^2) pure-python tau-b on absolute values."""
    x = [abs(float(v)) for v in a]
    y = [abs(float(v)) for v in b]
    n = len(x)
    num = 0
    tx = ty = 0
    n0 = 0
    for i in range(n):
        for j in range(i + 1, n):
            n0 += 1
            sx = (x[i] > x[j]) - (x[i] < x[j])
            sy = (y[i] > y[j]) - (y[i] < y[j])
            num += sx * sy
            if sx == 0:
                tx += 1
            if sy == 0:
                ty += 1
    den = math.sqrt(float((n0 - tx) * (n0 - ty)))
    return float(num) / den if den > 0 else 0.0


def brute_force_rho(a, b):
    """Pure-python average ranks plus Pearson, same final expression shape."""
    def ranks(v):
        v = [abs(float(u)) for u in v]
        order = sorted(range(len(v)), key=lambda i: (v[i], i))
        out = [0.0] * len(v)
        i = 0
        while i < len(v):
            j = i
            while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                j += 1
            for k in range(i, j + 1):
                out[order[k]] = (i + j) / 2.0 + 1.0
            i = j + 1
        return out

    ra, rb = ranks(a), ranks(b)
    n = len(ra)
    mean = (n + 1) / 2.0
    da = [r - mean for r in ra]
    db = [r - mean for r in rb]
    num = sum(p * q for p, q in zip(da, db))
    den = math.sqrt(sum(p * p for p in da) * sum(q * q for q in db))
    return num / den if den > 0 else 0.0


# ----------------------------------------------------------------- tests

class TestKendall:
    def test_identical_orderings(self):
        assert kendall_tau([1, 2, 3], [10, 20, 30]) == 1.0

    def test_reversed(self):
        assert kendall_tau([1, 2, 3], [3, 2, 1]) == -1.0

    def test_hand_case(self):
        got = kendall_tau([1, 2, 3], [1, 3, 2])
        assert got == pytest.approx(1.0 / 3.0)
        assert got == brute_force_tau([1, 2, 3], [1, 3, 2])

    def test_absolute_values_used(self):
        assert kendall_tau([1, -2, 3], [-1, 2, -3]) == 1.0

    def test_short_input_errors(self):
        with pytest.raises(DataError):
            kendall_tau([1.0], [1.0])

    def test_fuzz_matches_brute_force_exactly(self):
        rng = np.random.default_rng(77)
        for _ in range(500):
            m = int(rng.integers(2, 12))
            a = rng.normal(size=m)
            b = rng.normal(size=m)
            if rng.random() < 0.3:  # inject ties
                a[: m // 2] = a[0]
            assert kendall_tau(a, b) == brute_force_tau(a, b)


class TestSpearman:
    def test_identical(self):
        assert spearman_rho([1, 2, 3], [5, 6, 7]) == 1.0

    def test_reversed(self):
        assert spearman_rho([1, 2, 3], [3, 2, 1]) == -1.0

    def test_hand_case(self):
        got = spearman_rho([1, 2, 3], [1, 3, 2])
        assert got == pytest.approx(0.5)
        assert got == brute_force_rho([1, 2, 3], [1, 3, 2])

    def test_fuzz_matches_brute_force_exactly(self):
        rng = np.random.default_rng(78)
        for _ in range(500):
            m = int(rng.integers(2, 12))
            a = rng.normal(size=m)
            b = rng.normal(size=m)
            if rng.random() < 0.3:
                b[: m // 2] = b[0]
            assert spearman_rho(a, b) == brute_force_rho(a, b)


class TestSignMatch:
    def test_equal_vectors(self):
        assert sign_match_ratio([1.0, -2.0], [1.0, -2.0]) == 1.0

    def test_negated(self):
        assert sign_match_ratio([1.0, -2.0], [-1.0, 2.0]) == 0.0

    def test_zero_reference_always_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            u = rng.normal(size=6)
            assert sign_match_ratio(np.zeros(6), u) == 1.0

    def test_zeros_never_mismatch(self):
        assert sign_match_ratio([0.0, 1.0], [-5.0, 1.0]) == 1.0
        assert sign_match_ratio([1.0, 1.0], [0.0, 1.0]) == 1.0


class TestHit25:
    def test_equal(self):
        v = [3.0, -1.0, 2.0, 0.5]
        assert hit25(v, v) == 1.0

    def test_disjoint_top_sets(self):
        r = [9.0, 9.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]
        u = [0.1, 0.1, 9.0, 9.0, 0.1, 0.1, 0.1, 0.1]
        assert hit25(r, u) == 0.0

    def test_half_overlap_m8(self):
        r = [9.0, 8.0, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1]
        u = [9.0, 0.1, 8.0, 0.1, 0.1, 0.1, 0.1, 0.1]
        assert hit25(r, u) == 0.5

    def test_tie_break_by_lower_index(self):
        v = [1.0, 1.0, 1.0, 1.0, 1.0]  # ceil(5/4) = 2 -> indices 0, 1
        assert top_quartile_indices(v) == (0, 1)

    def test_topset_size(self):
        assert len(top_quartile_indices(np.arange(13))) == 4  # ceil(13/4)
        assert len(top_quartile_indices(np.arange(2))) == 1


class TestMetricRanges:
    @given(hnp.arrays(np.float64, st.integers(2, 16),
                      elements=st.floats(-1e6, 1e6)),
           st.integers(0, 2**31 - 1))
    @settings(max_examples=200, deadline=None)
    def test_ranges_hold(self, a, seed):
        rng = np.random.default_rng(seed)
        b = rng.normal(size=a.size)
        assert -1.0 <= kendall_tau(a, b) <= 1.0
        assert -1.0 <= spearman_rho(a, b) <= 1.0
        assert 0.0 <= sign_match_ratio(a, b) <= 1.0
        assert 0.0 <= hit25(a, b) <= 1.0


class TestKde:
    def test_kernel_peak(self):
        bw = 0.7
        got = kde_density([2.0], bw, 2.0)
        assert got == pytest.approx(1.0 / math.sqrt(2 * math.pi * bw**2))

    def test_far_query_vanishes(self):
        assert kde_density([0.0, 1.0], 0.5, 100.0) < 1e-12

    def test_derived_value(self):
        mp.mp.dps = 30
        oracle = float(mp.e ** mp.mpf("-0.125") / mp.sqrt(2 * mp.pi))
        assert oracle == pytest.approx(0.3520653267642995, abs=1e-15)
        assert kde_density([0.0, 1.0], 1.0, 0.5) == pytest.approx(oracle, abs=1e-12)

    def test_integrates_to_one(self):
        rng = np.random.default_rng(5)
        vals = rng.normal(size=40)
        bw = 0.3
        grid = np.linspace(vals.min() - 8, vals.max() + 8, 20_001)
        dens = kde_density(vals, bw, grid)
        integral = np.trapezoid(dens, grid)
        assert integral == pytest.approx(1.0, abs=1e-3)

    def test_bandwidth_default(self):
        assert default_bandwidth([0.0, 50.0]) == pytest.approx(2.0)
        assert default_bandwidth([1.0, 1.0]) == 1e-6  # floor


class TestBootstrap:
    def test_single_round(self, quad2d, ref2d):
        s = A.Sample([0.5, 0.5], 0.0)
        dist = A.bootstrap_variability(
            "zscore", s, quad2d, ref2d, B=1, Nb=30, seed=3)
        assert dist.values.shape == (1, 2)

    def test_lime_zero_spread(self, quad2d, ref2d):
        s = A.Sample([0.5, 0.5], 1.0)
        dist = A.bootstrap_variability(
            "lime", s, quad2d, ref2d, B=5, Nb=20, seed=3,
            lime_cfg=A.LimeConfig(ns=200, seed=9))
        assert np.all(dist.values.std(axis=0) == 0.0)

    def test_constant_model_eig_zero(self, ref2d):
        h = A.register_builtin("constant", {"c": 2.0})
        s = A.Sample([0.5, 0.5], 1.0)
        dist = A.bootstrap_variability(
            "eig", s, h, ref2d, B=3, Nb=15, seed=4,
            ig_cfg=A.IgConfig(intervals=10,
                              grad=A.GradientConfig(ns=10, eta=0.5, seed=2)))
        assert np.all(dist.values == 0.0)
        assert np.all(dist.values.std(axis=0) == 0.0)

    def test_resampling_changes_ref_methods(self, quad2d, ref2d):
        s = A.Sample([0.9, -0.3], 1.0)
        dist = A.bootstrap_variability(
            "zscore", s, quad2d, ref2d, B=6, Nb=25, seed=8)
        assert np.any(dist.values.std(axis=0) > 0.0)

    def test_deterministic(self, quad2d, ref2d):
        s = A.Sample([0.9, -0.3], 1.0)
        kw = dict(sv_cfg=A.SvConfig(mc_samples=100, seed=3))
        d1 = A.bootstrap_variability("sv", s, quad2d, ref2d, B=3, Nb=20, seed=5, **kw)
        d2 = A.bootstrap_variability("sv", s, quad2d, ref2d, B=3, Nb=20, seed=5, **kw)
        assert d1.values.tobytes() == d2.values.tobytes()


class TestScoreDistribution:
    def test_kde_grid_shape(self):
        dist = ScoreDistribution(("a", "b"), np.array([[0.0, 1.0], [1.0, 3.0]]))
        grids = dist.kde_grid(points=50)
        assert set(grids) == {"a", "b"}
        g, d = grids["a"]
        assert g.size == 50 and d.size == 50
        assert np.all(d >= 0)


class TestTheoremOracleSuite:
    def test_affine_fixture_all_pass(self):
        h = A.register_builtin("linear", {"a": [1.0, -2.0], "b": 0.5})
        rng = np.random.default_rng(3)
        ref = A.ReferenceSet(rng.normal(size=(25, 2)))
        s = A.Sample([0.7, 0.1], 5.0)
        checks = theorem_oracle_suite([("affine", h, s, ref)], seed=2)
        assert checks and all(c.passed for c in checks)
        assert {c.name for c in checks} >= {"ig-sum-rule", "eig-sum-rule",
                                            "sv-efficiency"}
