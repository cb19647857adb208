import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from oracles import FIG2_LEFT, FIG2_RIGHT, mwu_enumeration_pvalue, naive_unimodal, rank_fixtures
from ordino.analysis import (
    N_BINS,
    Verdict,
    bonferroni_compare,
    hd_bin_edges,
    histogram_l1,
    is_significant,
    mann_whitney_u,
    profile,
    summary_stats,
    tally,
    unimodal_fraction_exact,
)
from ordino.data import sample_uniform_simplex
from ordino.simplex import SIMPLEX_DIAMETER, hausdorff_to_unimodal, unimodal_mask


class TestProfile:
    def test_all_unimodal(self):
        prof = profile([FIG2_LEFT, np.full(10, 0.1)])
        assert prof.ur == 1.0 and prof.mhd == 0.0
        assert prof.histogram[0] == 1.0

    def test_single_non_unimodal_point(self):
        prof = profile([FIG2_RIGHT])
        assert prof.ur == 0.0
        assert prof.mhd == pytest.approx(hausdorff_to_unimodal(FIG2_RIGHT).distance, abs=1e-12)
        assert prof.n == 1

    def test_uniform_simplex_k5(self):
        n = 10_000
        prof = profile(sample_uniform_simplex(5, n, seed=11))
        target = 2 / 15
        assert abs(prof.ur - target) < 3 * math.sqrt(target * (1 - target) / n)
        assert prof.mhd == pytest.approx(0.1000, abs=0.007)

    def test_histogram_layout(self, rng):
        prof = profile(sample_uniform_simplex(4, 500, rng))
        assert prof.histogram.shape == (N_BINS,)
        assert prof.histogram.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(prof.bin_edges, np.linspace(0, SIMPLEX_DIAMETER, N_BINS + 1))
        assert 0 <= prof.ur <= 1 and 0 <= prof.mhd <= SIMPLEX_DIAMETER
        assert prof.ur == pytest.approx(np.mean(prof.hd_samples < 1e-8))
        d = prof.to_dict()
        assert d["n"] == 500 and len(d["histogram"]) == N_BINS
        assert prof.histogram_tsv().count("\n") == N_BINS + 1

    def test_empty(self):
        with pytest.raises(ValueError):
            profile(np.zeros((0, 4)))


class TestHistogramL1:
    def test_identical(self):
        f = np.full(N_BINS, 1 / N_BINS)
        assert histogram_l1(f, f) == 0.0

    def test_disjoint_masses(self):
        f = np.zeros(N_BINS)
        g = np.zeros(N_BINS)
        f[0], g[7] = 1.0, 1.0
        assert histogram_l1(f, g) == pytest.approx(2.0)

    def test_four_bin_fixture(self):
        # each of the 4 bins contributes |0.25|
        f = [0.5, 0.5, 0.0, 0.0]
        g = [0.25, 0.25, 0.25, 0.25]
        assert histogram_l1(f, g) == pytest.approx(1.0)
        assert histogram_l1(f, g, bin_width=0.5) == pytest.approx(1.0)

    def test_binning_mismatch(self):
        with pytest.raises(ValueError):
            histogram_l1(np.ones(4) / 4, np.ones(5) / 5)


class TestMannWhitney:
    def test_three_vs_three(self):
        res = mann_whitney_u([1, 2, 3], [4, 5, 6])
        assert res.statistic == 0.0 and res.exact
        assert res.pvalue == pytest.approx(0.1, abs=1e-15)

    def test_identical_samples(self):
        assert mann_whitney_u([1, 2, 3, 4], [1, 2, 3, 4]).pvalue == pytest.approx(1.0)
        assert mann_whitney_u([2.0] * 12, [2.0] * 12).pvalue == 1.0

    def test_exact_matches_enumeration_n4(self):
        for a, b in rank_fixtures(4, 4):
            assert mann_whitney_u(a, b).pvalue == mwu_enumeration_pvalue(a, b)

    def test_exact_matches_scipy(self, rng):
        for _ in range(30):
            n_a, n_b = int(rng.integers(1, 9)), int(rng.integers(1, 15))
            x = rng.permutation(n_a + n_b).astype(float)
            a, b = x[:n_a], x[n_a:]
            ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="exact")
            res = mann_whitney_u(a, b)
            assert res.statistic == ref.statistic
            assert res.pvalue == pytest.approx(ref.pvalue, rel=1e-12)

    def test_normal_approximation_matches_scipy(self, rng):
        for _ in range(30):
            a = rng.integers(0, 6, size=int(rng.integers(3, 20)))
            b = rng.integers(0, 6, size=int(rng.integers(9, 20)))
            ref = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                                     use_continuity=True)
            res = mann_whitney_u(a, b)
            assert not res.exact
            assert res.pvalue == pytest.approx(ref.pvalue, rel=1e-10)

    @given(st.lists(st.integers(0, 10), min_size=1, max_size=12),
           st.lists(st.integers(0, 10), min_size=1, max_size=12))
    def test_antisymmetry(self, a, b):
        ab, ba = mann_whitney_u(a, b), mann_whitney_u(b, a)
        assert ba.statistic == len(a) * len(b) - ab.statistic
        assert ba.pvalue == pytest.approx(ab.pvalue, abs=1e-12)
        assert 0 <= ab.pvalue <= 1

    def test_empty(self):
        with pytest.raises(ValueError):
            mann_whitney_u([], [1.0])


class TestBonferroni:
    def test_threshold(self):
        assert is_significant(0.04, m=1)
        assert not is_significant(0.04, m=24)
        with pytest.raises(ValueError):
            is_significant(0.01, m=0)

    def test_winner_is_lower_mean(self):
        v = bonferroni_compare([1, 2, 3, 4, 5, 6], [7, 8, 9, 10, 11, 12])
        assert v.significant and v.winner == "A" and v.pvalue < 0.05
        v = bonferroni_compare([7, 8, 9, 10, 11, 12], [1, 2, 3, 4, 5, 6], m=3)
        assert v.winner == "B"

    def test_tally_fixture(self):
        # three datasets: A clearly better, no difference, B clearly better
        pairs = [
            ([0.10, 0.11, 0.12, 0.13, 0.14, 0.15, 0.16, 0.17],
             [0.30, 0.31, 0.32, 0.33, 0.34, 0.35, 0.36, 0.37]),
            ([0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6],
             [0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5, 1.7]),
            ([0.90, 0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97],
             [0.50, 0.51, 0.52, 0.53, 0.54, 0.55, 0.56, 0.57]),
        ]
        verdicts = [bonferroni_compare(a, b, m=3) for a, b in pairs]
        # complete separation with n=8 gives p = 2/C(16,8) well below 0.05/3
        assert [v.winner for v in verdicts] == ["A", None, "B"]
        assert tally(verdicts) == (1, 1)

    def test_tally_ignores_insignificant(self):
        v = Verdict(0.5, False, None, 1.0, 2.0)
        assert tally([v, v]) == (0, 0)


class TestUnimodalFraction:
    @pytest.mark.parametrize("K,frac", [(4, Fraction(1, 3)), (5, Fraction(2, 15)), (6, Fraction(2, 45))])
    def test_values(self, K, frac):
        assert unimodal_fraction_exact(K) == frac

    @pytest.mark.parametrize("K", range(3, 9))
    def test_permutation_count(self, K):
        count = sum(naive_unimodal(np.array(p, dtype=float))
                    for p in itertools.permutations(range(K)))
        assert Fraction(count, math.factorial(K)) == unimodal_fraction_exact(K)

    def test_rejects_small_k(self):
        with pytest.raises(ValueError):
            unimodal_fraction_exact(1)

    @pytest.mark.parametrize("K", [4, 5, 6, 9, 10])
    def test_monte_carlo(self, K):
        n = 20_000
        ur = unimodal_mask(sample_uniform_simplex(K, n, seed=K)).mean()
        q = float(unimodal_fraction_exact(K))
        assert abs(ur - q) <= 3 * math.sqrt(q * (1 - q) / n) + 1 / n


def test_summary_stats():
    s = summary_stats([1.0, 2.0, 3.0, 4.0])
    assert s == {"mean": 2.5, "q25": 1.75, "median": 2.5, "q75": 3.25, "n": 4}


def test_bin_edges():
    assert hd_bin_edges(4)[-1] == pytest.approx(math.sqrt(2))
