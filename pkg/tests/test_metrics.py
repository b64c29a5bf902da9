"""Tests for the distance layer: K, W_r, Zolotarev bound, rate table, rate fit."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from freemult.errors import SolverError
from freemult.limitlaw import DensityTable, LimitParams, psc_singular_density
from freemult.metrics import (
    KWBoundReport,
    RatePrediction,
    SpectralSample,
    kolmogorov,
    kw_bound_check,
    rate_fit,
    rate_lookup,
    wasserstein_r,
    zolotarev_lower_bound,
)


def uniform_table(lo: float, hi: float, points: int = 2001) -> DensityTable:
    """Exact tabulation of the uniform law on (lo, hi)."""
    grid = np.linspace(lo, hi, points)
    pdf = np.full(points, 1.0 / (hi - lo))
    return DensityTable(grid, pdf, (grid - lo) / (hi - lo))


def brute_kolmogorov(a_vals, b_vals) -> float:
    """Dense one-sided scan over the pooled atoms, no shared code."""
    a = np.sort(np.asarray(a_vals, dtype=float))
    b = np.sort(np.asarray(b_vals, dtype=float))
    best = 0.0
    for t in np.unique(np.concatenate([a, b])):
        for side in ("left", "right"):
            fa = np.searchsorted(a, t, side=side) / a.size
            fb = np.searchsorted(b, t, side=side) / b.size
            best = max(best, abs(fa - fb))
    return best


def corpus():
    """Mixed bag of spectra and tables the metric properties run over."""
    tab = psc_singular_density(LimitParams.from_sigma(0.5))
    probs = (np.arange(200) + 0.5) / 200
    drawn = np.asarray(tab.quantile(probs))
    return [
        SpectralSample((0.2, 0.9, 1.3, 2.0)),
        SpectralSample(tuple(drawn), n_source=64, N_source=256),
        SpectralSample(tuple(drawn + 0.02)),
        uniform_table(0.0, 1.0),
        uniform_table(0.3, 1.3),
        tab,
    ]


finite_samples = st.lists(
    st.floats(-5.0, 5.0, allow_nan=False), min_size=1, max_size=12)


class TestSpectralSample:
    def test_sorts_on_construction(self):
        s = SpectralSample((2.0, -1.0, 0.5))
        assert s.values == (-1.0, 0.5, 2.0)
        assert s.size == 3

    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError, match="at least one"):
            SpectralSample(())
        with pytest.raises(ValueError, match="finite"):
            SpectralSample((0.0, math.inf))

    def test_provenance_validation(self):
        with pytest.raises(ValueError, match="n_source"):
            SpectralSample((1.0,), n_source=-1)
        with pytest.raises(ValueError, match="N_source"):
            SpectralSample((1.0,), N_source=2.5)

    def test_one_sided_cdf(self):
        s = SpectralSample((0.0, 1.0))
        assert s.cdf_at(0.0) == 0.5
        assert s.cdf_left_at(0.0) == 0.0
        assert s.cdf_at(1.0) == 1.0
        assert s.cdf_left_at(1.0) == 0.5
        assert s.cdf_at(-3.0) == 0.0

    def test_quantile_is_left_continuous_inverse(self):
        s = SpectralSample((1.0, 2.0))
        assert s.quantile(0.5) == 1.0  # inf{x : F(x) >= 1/2} is the first atom
        assert s.quantile(0.51) == 2.0
        with pytest.raises(ValueError):
            s.quantile(0.0)
        with pytest.raises(ValueError):
            s.quantile(1.0)

    def test_expectation_and_scaling(self):
        s = SpectralSample((1.0, 3.0), n_source=4, N_source=8)
        assert s.expectation(lambda x: x) == 2.0
        t = s.scaled(-2.0)
        assert t.values == (-6.0, -2.0)
        assert (t.n_source, t.N_source) == (4, 8)


class TestKolmogorov:
    def test_point_masses(self):
        assert kolmogorov([0.0], [1.0]) == 1.0

    def test_identical_samples(self):
        assert kolmogorov([0.3, 1.7], [0.3, 1.7]) == 0.0

    def test_two_vs_three_atoms(self):
        # F jumps to 1 at t=1 while the other law still holds 1/3 above it
        assert kolmogorov([0.0, 1.0], [0.0, 1.0, 2.0]) == pytest.approx(1 / 3, abs=1e-12)

    def test_atom_against_uniform(self):
        assert kolmogorov([0.5], uniform_table(0.0, 1.0)) == pytest.approx(0.5, abs=1e-9)

    def test_table_against_table(self):
        got = kolmogorov(uniform_table(0.0, 1.0), uniform_table(0.0, 2.0))
        assert got == pytest.approx(0.5, abs=1e-9)

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError):
            kolmogorov([], [1.0])

    @given(finite_samples, finite_samples)
    @settings(max_examples=60, deadline=None)
    def test_matches_brute_scan_and_is_symmetric(self, a, b):
        got = kolmogorov(a, b)
        assert got == kolmogorov(b, a)
        assert got == pytest.approx(brute_kolmogorov(a, b), abs=1e-12)
        assert 0.0 <= got <= 1.0

    def test_triangle_inequality_on_corpus(self):
        members = corpus()
        for a in members:
            for b in members:
                for c in members:
                    assert kolmogorov(a, b) <= (
                        kolmogorov(a, c) + kolmogorov(c, b) + 1e-12)


class TestWassersteinR:
    @pytest.mark.parametrize("r", [1.0, 1.5, 2.0, 3.0])
    def test_point_masses(self, r):
        assert wasserstein_r([0.0], [1.0], r) == pytest.approx(1.0, abs=1e-12)

    def test_sorted_pairing_example(self):
        assert wasserstein_r([0.0, 2.0], [1.0, 3.0], 1) == 1.0

    def test_equal_size_pairing_values(self):
        a, b = [0.3, -1.2, 2.0], [0.1, 0.4, 1.0]
        assert wasserstein_r(a, b, 1) == pytest.approx(0.8, rel=1e-12)
        assert wasserstein_r(a, b, 2) == pytest.approx(0.9486832980505138, rel=1e-12)

    @given(finite_samples, finite_samples)
    @settings(max_examples=60, deadline=None)
    def test_equal_size_matches_library_transport(self, a, b):
        size = min(len(a), len(b))
        a, b = a[:size], b[:size]
        got = wasserstein_r(a, b, 1)
        assert got == pytest.approx(stats.wasserstein_distance(a, b), abs=1e-9)

    def test_unequal_sizes_by_quadrature(self):
        # library oracle gives 13/12 for this pair; quadrature carries
        # an O(1/panels) step-placement error
        got = wasserstein_r([0.0, 1.0, 4.0], [0.5, 2.0], 1)
        assert got == pytest.approx(1.0833333333333335, abs=2e-4)

    def test_uniform_tables(self):
        u1, u2 = uniform_table(0.0, 1.0), uniform_table(0.0, 2.0)
        assert wasserstein_r(u1, u2, 1) == pytest.approx(0.5, abs=1e-6)
        assert wasserstein_r(u1, u2, 2) == pytest.approx(1 / math.sqrt(3), abs=1e-6)

    @pytest.mark.parametrize("r", [1.0, 1.5, 2.0, 3.0])
    def test_translation_distance(self, r):
        got = wasserstein_r(uniform_table(0.0, 1.0), uniform_table(0.3, 1.3), r)
        assert got == pytest.approx(0.3, abs=1e-9)

    @given(finite_samples, finite_samples)
    @settings(max_examples=40, deadline=None)
    def test_order_monotonicity(self, a, b):
        size = min(len(a), len(b))
        a, b = a[:size], b[:size]
        assert wasserstein_r(a, b, 1) <= wasserstein_r(a, b, 2) + 1e-12

    @given(finite_samples, finite_samples,
           st.floats(-3.0, 3.0, allow_nan=False).filter(lambda c: abs(c) > 1e-3),
           st.sampled_from([1.0, 1.5, 2.0]))
    @settings(max_examples=40, deadline=None)
    def test_absolute_homogeneity(self, a, b, c, r):
        size = min(len(a), len(b))
        sa = SpectralSample(tuple(a[:size]))
        sb = SpectralSample(tuple(b[:size]))
        lhs = wasserstein_r(sa.scaled(c), sb.scaled(c), r)
        assert lhs == pytest.approx(abs(c) * wasserstein_r(sa, sb, r), rel=1e-9, abs=1e-12)

    def test_mixed_sample_table_consistency(self):
        tab = uniform_table(0.0, 1.0)
        atoms = SpectralSample(tuple((np.arange(512) + 0.5) / 512))
        assert wasserstein_r(atoms, tab, 1) <= 2e-3

    def test_rejects_small_order(self):
        with pytest.raises(ValueError):
            wasserstein_r([0.0], [1.0], 0.5)


class TestKWBound:
    def test_report_fields_and_formula(self):
        rep = kw_bound_check([0.25, 0.5, 0.75], uniform_table(0.0, 1.0))
        assert isinstance(rep, KWBoundReport)
        assert rep.bound == pytest.approx(math.sqrt(2 * 1.0 * rep.wasserstein1), rel=1e-12)
        assert rep.holds

    def test_holds_across_corpus(self):
        tables = [m for m in corpus() if isinstance(m, DensityTable)]
        samples = [m for m in corpus() if isinstance(m, SpectralSample)]
        for ref in tables:
            for s in samples:
                assert kw_bound_check(s, ref).holds

    def test_sample_drawn_from_reference_is_close(self):
        tab = psc_singular_density(LimitParams.from_sigma(0.25))
        probs = (np.arange(400) + 0.5) / 400
        rep = kw_bound_check(tuple(np.asarray(tab.quantile(probs))), tab)
        assert rep.holds and rep.kolmogorov < 0.01

    def test_perturbed_sample_still_holds(self):
        tab = psc_singular_density(LimitParams.from_sigma(0.5))
        probs = (np.arange(100) + 0.5) / 100
        shifted = np.asarray(tab.quantile(probs)) + 0.05
        assert kw_bound_check(tuple(shifted), tab).holds

    def test_reference_must_be_a_table(self):
        with pytest.raises(TypeError):
            kw_bound_check([0.5], [0.5, 1.0])


class TestZolotarevLowerBound:
    def test_identical_inputs(self):
        assert zolotarev_lower_bound([0.5, 1.0], [0.5, 1.0], 2, trials=4, seed=1) == 0.0

    def test_point_masses_attain_wasserstein(self):
        # the identity witness transports the full unit of mass
        assert zolotarev_lower_bound([0.0], [1.0], 1, trials=8, seed=3) == 1.0

    def test_translation_attains_wasserstein(self):
        got = zolotarev_lower_bound(uniform_table(0.0, 1.0), uniform_table(0.3, 1.3),
                                    1, trials=6, seed=5)
        assert got == pytest.approx(0.3, abs=1e-9)

    def test_order_two_canonical_witness(self):
        # E sgn(x) x^2/2 differs by |1/6 - 2/3| = 1/2 between the uniforms
        got = zolotarev_lower_bound(uniform_table(0.0, 1.0), uniform_table(0.0, 2.0),
                                    2, trials=6, seed=5)
        assert got >= 0.5 - 1e-6

    def test_duality_direction_on_corpus(self):
        # both sides of the comparison are exact for samples and uniform
        # tables, so the tight tolerance is meaningful on those
        exact = [m for m in corpus()
                 if isinstance(m, SpectralSample) or float(np.ptp(m.pdf)) == 0.0]
        for a in exact:
            for b in exact:
                lb = zolotarev_lower_bound(a, b, 1, trials=6, seed=11)
                assert lb <= wasserstein_r(a, b, 1) + 1e-9

    def test_duality_across_discretizations(self):
        # the spectral-law table represents the measure twice over
        # (trapezoid density vs interpolated quantiles); ordered pairs
        # attain duality, so the two routes may differ at the 1e-7 scale
        members = corpus()
        for a in members:
            for b in members:
                lb = zolotarev_lower_bound(a, b, 1, trials=4, seed=11)
                assert lb <= wasserstein_r(a, b, 1) + 1e-6

    def test_deterministic_in_seed(self):
        args = ([0.1, 0.9, 2.0], [0.3, 0.4], 1.5)
        a = zolotarev_lower_bound(*args, trials=12, seed=7)
        b = zolotarev_lower_bound(*args, trials=12, seed=7)
        assert a == b

    def test_zero_trials_keeps_deterministic_witnesses(self):
        assert zolotarev_lower_bound([0.0], [1.0], 1, trials=0, seed=0) == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            zolotarev_lower_bound([0.0], [1.0], 0.9)
        with pytest.raises(ValueError):
            zolotarev_lower_bound([0.0], [1.0], 1, trials=-2)


class TestRateLookup:
    # every table cell, evaluated on both sides of its threshold
    CELLS = [
        (1.0, 0.5, "minus", 0.8, 0.0625, 0.0),
        (1.0, 0.9, "plus", 0.8, 0.1, 0.0),
        (1.5, 0.5, "minus", 23 / 31, 0.5 / 11.5, 0.0),
        (1.5, 0.99, "plus", 23 / 31, 1 / 15.5, 0.0),
        (2.0, 0.5, "minus", 2 / 3, 0.0625, 0.5),
        (2.0, 0.9, "plus", 2 / 3, 1 / 12, 0.0),
        (3.0, 0.5, "minus", 15 / 16, 0.5 / 30, 0.0),
        (3.0, 0.99, "plus", 15 / 16, 1 / 32, 0.0),
        (4.0, 0.5, "minus", 1.0, 0.5 / 48, 0.0),
        (4.0, 1.0, "minus", 1.0, 1 / 48, 0.0),
        (7.0, 0.5, "minus", 1.0, 0.5 / 84, 0.0),
        (7.0, 1.0, "minus", 1.0, 1 / 84, 0.0),
    ]

    @pytest.mark.parametrize("r,gamma,branch,crit,beta1,beta2", CELLS)
    def test_table_cells(self, r, gamma, branch, crit, beta1, beta2):
        got = rate_lookup(r, gamma)
        assert got == RatePrediction(pytest.approx(beta1, rel=1e-12),
                                     pytest.approx(beta2, abs=0.0),
                                     branch, pytest.approx(crit, rel=1e-12))

    def test_cubic_case_cross_check(self):
        # the worked cubic case: threshold 15/16, slow branch gamma/30,
        # fast branch 1/32 — the generic row formulas must reproduce it
        got = rate_lookup(3.0, 0.6)
        assert got.gamma_crit == pytest.approx(15 / 16, rel=1e-15)
        assert got.beta1 == pytest.approx(0.6 / 30, rel=1e-15)
        assert rate_lookup(3.0, 0.95).beta1 == pytest.approx(1 / 32, rel=1e-15)

    def test_equality_takes_slow_branch(self):
        assert rate_lookup(4.0, 1.0).branch == "minus"
        assert rate_lookup(2.0, 2 / 3).branch == "minus"

    def test_rows_join_continuously_at_four(self):
        inner = rate_lookup(3.999999, 0.5)
        outer = rate_lookup(4.0, 0.5)
        beyond = rate_lookup(4.000001, 0.5)
        assert inner.beta1 == pytest.approx(outer.beta1, rel=1e-5)
        assert beyond.beta1 == pytest.approx(outer.beta1, rel=1e-5)

    def test_validation(self):
        with pytest.raises(ValueError):
            rate_lookup(0.5, 0.5)
        with pytest.raises(ValueError):
            rate_lookup(2.0, 0.0)
        with pytest.raises(ValueError):
            rate_lookup(2.0, 1.2)


class TestRateFit:
    NS = tuple(int(n) for n in 2 ** np.arange(6, 17))

    def test_pure_power(self):
        ds = [0.7 * n ** -0.5 for n in self.NS]
        beta1, beta2, r2 = rate_fit(self.NS, ds)
        assert beta1 == pytest.approx(0.5, abs=1e-10)
        assert abs(beta2) <= 1e-9
        assert r2 == pytest.approx(1.0, abs=1e-12)

    def test_power_with_log_factor(self):
        ds = [3.0 * n ** -0.1 * math.log(n) ** 0.25 for n in self.NS]
        beta1, beta2, _ = rate_fit(self.NS, ds)
        assert beta1 == pytest.approx(0.1, abs=5e-2)
        assert beta2 == pytest.approx(0.25, abs=5e-2)

    def test_multiplicative_noise_robustness(self):
        rng = np.random.default_rng(11)
        clean = np.array([3.0 * n ** -0.1 * math.log(n) ** 0.25 for n in self.NS])
        beta1, _, r2 = rate_fit(self.NS, clean * rng.uniform(0.9, 1.1, len(self.NS)))
        assert abs(beta1 - 0.1) <= 0.05
        assert r2 < 1.0

    def test_without_log_column(self):
        ds = [0.7 * n ** -0.5 for n in self.NS]
        beta1, beta2, _ = rate_fit(self.NS, ds, with_log=False)
        assert beta1 == pytest.approx(0.5, abs=1e-12)
        assert beta2 == 0.0

    def test_validation(self):
        with pytest.raises(ValueError, match="at least 4"):
            rate_fit([2, 4, 8], [1.0, 0.5, 0.25])
        with pytest.raises(ValueError, match="increasing"):
            rate_fit([2, 4, 4, 8], [1.0, 0.5, 0.4, 0.25])
        with pytest.raises(ValueError, match="positive"):
            rate_fit([2, 4, 8, 16], [1.0, 0.5, 0.0, 0.25])
        with pytest.raises(ValueError, match="above 1"):
            rate_fit([1, 2, 4, 8], [1.0, 0.5, 0.4, 0.25])
