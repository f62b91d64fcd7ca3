"""Coincidence analysis: histograms, matching, CAR, link matrix."""

import math

import numpy as np
import pytest
from scipy import stats

from entnetsim import ItuChannel, build_plan
from entnetsim.analysis import (CAR_CAP, compute_car, cross_correlate,
                                link_matrix, match_coincidences,
                                write_histogram_csv, write_links_csv)
from entnetsim.photonics import ContractViolation
from entnetsim.sim import SystemConfig, fiber_delay_ps, run_scenario

import helpers
from test_sim import light_system


def poisson_stream(rng, rate_hz, duration_s):
    n = rng.poisson(rate_hz * duration_s)
    return np.sort(rng.integers(0, int(duration_s * 1e12), size=n,
                                dtype=np.int64))


class TestCrossCorrelate:
    def test_identical_single_tag(self):
        a = np.array([1000], dtype=np.int64)
        hist = cross_correlate(a, a, 128, 33 * 128)
        assert hist.total() == 1
        assert hist.counts[hist.n_bins // 2] == 1
        assert hist.delays_ps()[hist.n_bins // 2] == 0

    def test_flat_accidental_floor(self):
        rng = np.random.default_rng(50)
        r1 = r2 = 5e5
        t = 1.0
        a = poisson_stream(rng, r1, t)
        b = poisson_stream(rng, r2, t)
        hist = cross_correlate(a, b, 128, 33 * 128)
        per_bin = r1 * r2 * t * 128e-12
        mean = hist.counts.mean()
        sigma = math.sqrt(per_bin / hist.n_bins)
        assert abs(mean - per_bin) < 5 * sigma
        assert stats.chisquare(hist.counts).pvalue > 0.001

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        a = poisson_stream(rng, 2e5, 0.001)
        b = poisson_stream(rng, 2e5, 0.001)
        hist = cross_correlate(a, b, 64, 1024, offset_ps=37)
        expected = helpers.brute_histogram(a, b, 37, 64, hist.n_bins)
        np.testing.assert_array_equal(hist.counts, expected)

    def test_entangled_peak_at_configured_delay(self):
        plan = build_plan(1, 2, ItuChannel(40))
        sys_cfg = light_system(pair_rate=1e5, fiber={1: 1.0})
        sys_cfg.losses.fiber_km[1] = 1.0
        res = run_scenario(plan, sys_cfg, 0.2, seed=3, collect_truth=False)
        ta, _ = res.user_stream(0)
        tb, _ = res.user_stream(1)
        offset = fiber_delay_ps(sys_cfg.losses, 1) - 0
        hist = cross_correlate(ta, tb, 128, 33 * 128, offset_ps=offset)
        assert int(np.argmax(hist.counts)) == hist.n_bins // 2

    def test_unsorted_rejected(self):
        with pytest.raises(ContractViolation):
            cross_correlate(np.array([5, 1]), np.array([1]), 10, 100)

    def test_histogram_csv(self, tmp_path):
        hist = cross_correlate(np.array([0, 100]), np.array([50]), 64, 640)
        out = tmp_path / "h.csv"
        write_histogram_csv(hist, out, user_a=0, user_b=1)
        lines = out.read_text().splitlines()
        meta = [l for l in lines if l.startswith("#")]
        assert "# user_a=0" in meta and "# bin_width_ps=64" in meta
        header_idx = lines.index("delay_ps,counts")
        assert len(lines) - header_idx - 1 == hist.n_bins


class TestMatchCoincidences:
    def test_half_width_inclusive(self):
        # 128 ps full window -> half-width 64, |150-100| = 50 matches
        m = match_coincidences(np.array([100]), np.array([150]), 128)
        assert len(m) == 1
        # just outside: |165-100| = 65 > 64
        m = match_coincidences(np.array([100]), np.array([165]), 128)
        assert len(m) == 0

    def test_two_isolated_pairs(self):
        a = np.array([0, 1000], dtype=np.int64)
        m = match_coincidences(a, a.copy(), 128)
        assert len(m) == 2

    def test_one_to_one_no_double_count(self):
        a = np.array([0], dtype=np.int64)
        b = np.array([10, 20], dtype=np.int64)
        m = match_coincidences(a, b, 128)
        assert len(m) == 1 and m.times_b[0] == 10

    def test_matches_brute_force_large(self):
        rng = np.random.default_rng(77)
        a = np.sort(rng.integers(0, 10_000_000, size=10_000, dtype=np.int64))
        b = np.sort(rng.integers(0, 10_000_000, size=10_000, dtype=np.int64))
        m = match_coincidences(a, b, 128, offset_ps=-55)
        ea, eb = helpers.brute_greedy_match_vec(a, b, -55, 64)
        np.testing.assert_array_equal(m.index_a, ea)
        np.testing.assert_array_equal(m.index_b, eb)

    def test_deltas_relative_to_offset(self):
        m = match_coincidences(np.array([100]), np.array([160]), 128,
                               offset_ps=50)
        np.testing.assert_array_equal(m.deltas_ps(), [10])


class TestComputeCar:
    def test_flat_histogram_car_near_one(self):
        rng = np.random.default_rng(4)
        a = poisson_stream(rng, 1e6, 0.5)
        b = poisson_stream(rng, 1e6, 0.5)
        hist = cross_correlate(a, b, 128, 65 * 128)
        est = compute_car(hist, 128)
        assert 0.5 < est.car < 2.0
        assert not est.capped

    def test_delta_peak_on_zero_floor_capped(self):
        a = np.arange(0, 10_000_000, 10_000, dtype=np.int64)
        hist = cross_correlate(a, a.copy(), 128, 33 * 128)
        est = compute_car(hist, 128)
        assert est.capped and est.car == CAR_CAP

    def test_translation_invariance(self):
        rng = np.random.default_rng(12)
        a = poisson_stream(rng, 3e5, 0.05)
        b = poisson_stream(rng, 3e5, 0.05)
        h1 = cross_correlate(a, b, 128, 33 * 128)
        h2 = cross_correlate(a + 123_456, b + 123_456, 128, 33 * 128)
        np.testing.assert_array_equal(h1.counts, h2.counts)
        assert compute_car(h1, 128).car == compute_car(h2, 128).car

    def test_guard_region_excluded_from_floor(self):
        # leakage adjacent to the peak must not inflate the accidental floor
        counts = np.zeros(33, dtype=np.int64)
        counts[16] = 1000
        counts[15] = counts[17] = 200  # in-guard leakage
        off_peak = 4
        counts[:13] = off_peak
        counts[20:] = off_peak
        hist = cross_correlate(np.array([0]), np.array([0]), 128, 33 * 128)
        hist = type(hist)(bin_width_ps=128, offset_ps=0, counts=counts,
                          singles_a=0, singles_b=0, duration_ps=0)
        est = compute_car(hist, 128)
        assert est.car == pytest.approx(1000 / off_peak)

    def test_no_off_peak_bins_rejected(self):
        hist = cross_correlate(np.array([0]), np.array([0]), 128, 3 * 128)
        with pytest.raises(ValueError):
            compute_car(hist, 128)


class TestTruthLogValidation:
    def test_accidental_floor_of_uncorrelated_subsets(self):
        # dark-count tags (truth row -1) are mutually uncorrelated; their
        # cross-correlation must be flat at r1*r2*T*bin_width per bin
        plan = build_plan(1, 2, ItuChannel(40))
        sys_cfg = light_system(pair_rate=1e4, dark=2e5, jitter=0.0)
        duration = 2.0
        res = run_scenario(plan, sys_cfg, duration, seed=52)
        ta, _ = res.user_stream(0)
        tb, _ = res.user_stream(1)
        dark_a = ta[res.user_pair_rows(0) == -1]
        dark_b = tb[res.user_pair_rows(1) == -1]
        hist = cross_correlate(dark_a, dark_b, 128, 65 * 128)
        r1 = dark_a.size / duration
        r2 = dark_b.size / duration
        per_bin = r1 * r2 * duration * 128e-12
        sigma = math.sqrt(per_bin / hist.n_bins)
        assert abs(hist.counts.mean() - per_bin) < 5 * sigma
        assert stats.chisquare(hist.counts).pvalue > 0.001

    def test_histogram_car_agrees_with_truth_classification(self):
        # dark-heavy configuration so the accidental floor is populated
        plan = build_plan(1, 2, ItuChannel(40))
        sys_cfg = light_system(pair_rate=2e5, dark=2e5, jitter=5.0)
        duration = 5.0
        res = run_scenario(plan, sys_cfg, duration, seed=41)
        ta, _ = res.user_stream(0)
        tb, _ = res.user_stream(1)
        rows_a = res.user_pair_rows(0)
        rows_b = res.user_pair_rows(1)

        window = 128
        m = match_coincidences(ta, tb, window)
        ra, rb = rows_a[m.index_a], rows_b[m.index_b]
        true_matches = int(np.count_nonzero((ra >= 0) & (ra == rb)))
        accidental = len(m) - true_matches
        assert accidental > 20  # enough statistics to compare against

        hist = cross_correlate(ta, tb, window, 33 * window)
        est = compute_car(hist, window)
        car_truth = true_matches / accidental
        assert 0.5 < est.car / car_truth < 2.0


class TestLinkMatrix:
    def test_reference_subset(self, reference_plan):
        sys_cfg = SystemConfig()
        users = [0, 1, 8]
        res = run_scenario(reference_plan, sys_cfg, 1.0, seed=9,
                           selected_users=users, collect_truth=False)
        streams = {u: res.user_stream(u) for u in users}
        delays = {u: fiber_delay_ps(sys_cfg.losses, u) for u in users}
        links = [(0, 1), (0, 8)]
        reports, hists = link_matrix(streams, reference_plan, links, 128, delays,
                                     1.0)
        assert [r.kind for r in reports] == ["intra", "inter"]
        assert reports[0].resource_id == 1
        assert reports[1].resource_id == 6
        assert all(r.coincidences > 0 for r in reports)
        assert set(hists) == set(links)

    def test_links_csv_format(self, tmp_path, reference_plan):
        sys_cfg = SystemConfig()
        res = run_scenario(reference_plan, sys_cfg, 0.2, seed=2,
                           selected_users=[0, 1], collect_truth=False)
        streams = {u: res.user_stream(u) for u in (0, 1)}
        delays = {u: fiber_delay_ps(sys_cfg.losses, u) for u in (0, 1)}
        reports, _ = link_matrix(streams, reference_plan, [(0, 1)], 128, delays, 0.2)
        out = tmp_path / "links.csv"
        write_links_csv(reports, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "user_a,user_b,kind,resource_id,coincidences,car,duration_s"
        assert lines[1].startswith("0,1,intra,1,")
