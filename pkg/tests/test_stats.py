"""ECDF, KS distance, stability, significance, and phase classification."""

import math

import pytest
from hypothesis import given, strategies as st

from agx.stats import (
    Ecdf,
    EmptyDistributionError,
    classify_phase,
    dkw_epsilon,
    ks_distance,
    phase_from_series,
    significance,
    stability,
)

samples = st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=30)


def brute_force_ks(a: list[float], b: list[float]) -> float:
    """Oracle: evaluate both step functions at every pooled point by counting."""
    worst = 0.0
    for t in a + b:
        fa = sum(1 for v in a if v <= t) / len(a)
        fb = sum(1 for v in b if v <= t) / len(b)
        worst = max(worst, abs(fa - fb))
    return worst


class TestKsDistance:
    def test_identical_samples(self):
        assert ks_distance(Ecdf([0.2, 0.4, 0.4]), Ecdf([0.4, 0.2, 0.4])) == 0.0

    def test_disjoint_masses(self):
        assert ks_distance(Ecdf([0.0, 0.0]), Ecdf([1.0, 1.0])) == 1.0

    def test_offset_quartets(self):
        a, b = [0.1, 0.2, 0.3, 0.4], [0.3, 0.4, 0.5, 0.6]
        expected = brute_force_ks(a, b)
        assert expected == 0.5
        assert ks_distance(Ecdf(a), Ecdf(b)) == expected

    def test_empty_rejected(self):
        with pytest.raises(EmptyDistributionError):
            ks_distance(Ecdf([]), Ecdf([0.5]))

    @given(samples, samples)
    def test_matches_brute_force(self, a, b):
        assert ks_distance(Ecdf(a), Ecdf(b)) == pytest.approx(brute_force_ks(a, b), abs=1e-12)

    @given(samples, samples)
    def test_symmetric_and_bounded(self, a, b):
        d = ks_distance(Ecdf(a), Ecdf(b))
        assert 0.0 <= d <= 1.0
        assert d == ks_distance(Ecdf(b), Ecdf(a))

    @given(samples, samples, samples)
    def test_triangle_inequality(self, a, b, c):
        ab = ks_distance(Ecdf(a), Ecdf(b))
        bc = ks_distance(Ecdf(b), Ecdf(c))
        ac = ks_distance(Ecdf(a), Ecdf(c))
        assert ac <= ab + bc + 1e-12


class TestStability:
    def test_identical(self):
        assert stability(Ecdf([0.1, 0.5]), Ecdf([0.5, 0.1])) == 1.0

    def test_maximally_separated(self):
        assert stability(Ecdf([0.0]), Ecdf([1.0])) == 0.0

    def test_half(self):
        assert stability(Ecdf([0.1, 0.2, 0.3, 0.4]), Ecdf([0.3, 0.4, 0.5, 0.6])) == 0.5

    def test_ks_of_006_gives_094(self):
        # 50-sample distributions differing in 3 of 50 points: KS = 0.06
        a = [i / 100 for i in range(50)]
        b = list(a)
        b[-3:] = [0.99, 0.991, 0.992]
        assert ks_distance(Ecdf(a), Ecdf(b)) == pytest.approx(0.06, abs=1e-12)
        assert stability(Ecdf(a), Ecdf(b)) == pytest.approx(0.94, abs=1e-12)


class TestSignificance:
    def test_dkw_radius(self):
        expected = math.sqrt(math.log(2 / 0.05) / (2 * 1000))
        assert dkw_epsilon(1000, 0.05) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.04295, abs=1e-5)

    def test_zero_ks_thousand_samples_significant(self):
        values = [i / 1000 for i in range(1000)]
        result = significance(Ecdf(values), Ecdf(values), threshold=0.1, alpha=0.05)
        assert result.significant
        assert result.ks == 0.0
        assert result.epsilon_n == pytest.approx(0.0429469, abs=1e-6)

    def test_ks_beyond_threshold_never_significant(self):
        a = [0.0] * 10 + [1.0] * 40
        b = [0.0] * 20 + [1.0] * 30
        r = significance(Ecdf(a), Ecdf(b), threshold=0.1)
        assert r.ks == pytest.approx(0.2)
        assert not r.significant

    def test_large_n_limit(self):
        n = 10**9
        assert dkw_epsilon(n, 0.05) + 0.09 <= 0.1  # ks 0.09 becomes significant


class TestPhase:
    def test_thresholds(self):
        assert classify_phase(0.5) == "early"
        assert classify_phase(0.90) == "mature"
        assert classify_phase(0.99) == "definitive"

    def test_boundaries(self):
        assert classify_phase(0.85) == "mature"
        assert classify_phase(0.95) == "definitive"

    def test_empty_series_is_early(self):
        assert phase_from_series([]) == "early"

    def test_moving_median_window(self):
        series = [0.2] * 10 + [0.96] * 10
        assert phase_from_series(series, window=10) == "definitive"
        assert phase_from_series(series[:11], window=10) == "early"

    def test_median_robust_to_single_dip(self):
        series = [0.97] * 9 + [0.1]
        assert phase_from_series(series, window=10) == "definitive"
