"""Balls-in-bins: occupancy statistics, q_F estimator, DA coupling."""

import math

import numpy as np
import pytest

from matchlab import (
    AllOccupied,
    BinOccupancy,
    FixedThrows,
    MarketConfig,
    Model,
    OccupiedReaches,
    ParameterError,
    Side,
    acceptance_prob_estimate,
    run_balls_in_bins,
    run_coupled_da_bins,
    unmatched_estimate,
    unmatched_receiver_counts,
)
from matchlab.rng import stream

from .helpers import (
    coupon_collector_mean,
    coupon_collector_var,
    empty_bins_mean,
    empty_bins_var,
)


class TestOccupancyProcess:
    def test_zero_throws(self):
        occ = run_balls_in_bins(10, FixedThrows(0), seed=1)
        assert occ.throws == 0 and occ.occupied == 0 and occ.empty == 10
        assert occ.counts.sum() == 0

    def test_conservation_and_occupied(self):
        for seed in range(20):
            occ = run_balls_in_bins(37, FixedThrows(100), seed=seed)
            assert occ.counts.sum() == occ.throws == 100
            assert occ.occupied == int(np.count_nonzero(occ.counts))

    def test_occupied_reaches_stops_exactly(self):
        for seed in range(30):
            occ = run_balls_in_bins(23, OccupiedReaches(11), seed=seed)
            assert occ.occupied == 11
            # the final throw is the one that hit the 11th distinct bin
            assert occ.counts[occ.counts == 1].size >= 1

    def test_all_occupied(self):
        occ = run_balls_in_bins(17, AllOccupied(), seed=5)
        assert occ.occupied == 17
        assert occ.empty == 0

    def test_occupied_target_bounds(self):
        with pytest.raises(ParameterError):
            run_balls_in_bins(5, OccupiedReaches(6))
        with pytest.raises(ParameterError):
            run_balls_in_bins(0, FixedThrows(1))

    def test_empty_bin_mean_matches_exact_value(self):
        # classic occupancy: E[empty] = n(1-1/n)^t, here at n=t=100
        bins, throws, trials = 100, 100, 4000
        rng = stream(404)
        total_empty = 0
        for _ in range(trials):
            ids = rng.integers(0, bins, size=throws)
            total_empty += bins - np.unique(ids).size
        mean = total_empty / trials
        expected = empty_bins_mean(bins, throws)
        band = 3 * math.sqrt(empty_bins_var(bins, throws) / trials)
        assert expected == pytest.approx(36.6032341273, abs=1e-6)
        assert abs(mean - expected) <= band

    def test_empty_bin_mean_through_public_api(self):
        bins, throws, trials = 64, 128, 1500
        total = 0
        for k in range(trials):
            total += run_balls_in_bins(bins, FixedThrows(throws), rng=stream(77, k)).empty
        band = 3 * math.sqrt(empty_bins_var(bins, throws) / trials)
        assert abs(total / trials - empty_bins_mean(bins, throws)) <= band

    def test_coupon_collector_mean_throws(self):
        bins, trials = 60, 3000
        total = 0
        for k in range(trials):
            total += run_balls_in_bins(bins, AllOccupied(), rng=stream(88, k)).throws
        mean = total / trials
        expected = coupon_collector_mean(bins)
        band = 3 * math.sqrt(coupon_collector_var(bins) / trials)
        assert abs(mean - expected) <= band


class TestUnmatchedEstimate:
    def test_zero_tau(self):
        est = unmatched_estimate(100, 0)
        assert est.exponential == 100.0
        assert est.exact == 100.0

    def test_n_log_n_drives_to_one(self):
        n = 1000
        tau = round(n * math.log(n))
        assert unmatched_estimate(n, tau).exponential == pytest.approx(1.0, rel=5e-3)

    def test_exact_vs_exponential_ordering(self):
        # (1 - 1/n)^tau <= e^{-tau/n}, so the exact mean sits below the centering
        for n, tau in [(10, 5), (100, 300), (1000, 2000)]:
            est = unmatched_estimate(n, tau)
            assert est.exact <= est.exponential + 1e-12

    def test_empirical_cpda_unmatched_band(self):
        # Concentration of the untouched-receiver count at tau = n proposals:
        # deviations beyond (1 +/- gamma) * n e^{-tau/n} should be rarer than
        # 2 e^{tau/n} / (gamma^2 n) (plus MC slack).
        n, gamma, trials = 400, 0.5, 300
        cfg = MarketConfig(n=n, alpha=0.0, d=float(n), model=Model.CANDIDATE_LISTS, seed=0)
        center = unmatched_estimate(n, n).exponential
        failures = 0
        for k in range(trials):
            count = unmatched_receiver_counts(cfg, Side.CPDA, [n], rng=stream(515, k))[0]
            if not ((1 - gamma) * center <= count <= (1 + gamma) * center):
                failures += 1
        bound = 2 * math.exp(1.0) / (gamma**2 * n)
        se = math.sqrt(bound * (1 - bound) / trials) if bound < 1 else 0.0
        assert failures / trials <= bound + 5 * se + 1e-12

    def test_validation(self):
        with pytest.raises(ParameterError):
            unmatched_estimate(0, 1)
        with pytest.raises(ParameterError):
            unmatched_estimate(5, -1)


class TestAcceptanceProbEstimate:
    def test_all_zero_occupancy(self):
        occ = BinOccupancy.from_counts(np.zeros(8, dtype=np.int64))
        assert acceptance_prob_estimate(occ) == 0.0

    def test_uniform_one_per_bin(self):
        occ = BinOccupancy.from_counts(np.ones(8, dtype=np.int64))
        assert acceptance_prob_estimate(occ) == pytest.approx(0.5)

    def test_qf_mean_near_proposition_band(self):
        # q_F at kappa = n ln n - C n throws, C = 2: mean within
        # 4 (n/kappa)^2 + 5 sigma of 1 - n/(n+kappa).
        n, c_const, trials = 1000, 2.0, 400
        kappa = round(n * math.log(n) - c_const * n)
        vals = []
        for k in range(trials):
            occ = run_balls_in_bins(n, FixedThrows(kappa), rng=stream(606, k))
            vals.append(acceptance_prob_estimate(occ))
        mean = float(np.mean(vals))
        target = 1 - n / (n + kappa)
        tol = 4 * (n / kappa) ** 2 + 5 * float(np.std(vals)) / math.sqrt(trials)
        assert abs(mean - target) <= tol


class TestCoupledRuns:
    def test_domination_holds_every_trial_cpda(self):
        cfg = MarketConfig(n=50, alpha=0.0, d=6.0, model=Model.CANDIDATE_LISTS, seed=0)
        for k in range(200):
            trace = run_coupled_da_bins(cfg, Side.CPDA, rng=stream(71, k))
            assert trace.tau <= trace.kappa
            assert all(j <= b for j, b in trace.proposals_vs_balls)
            assert trace.occupancy.throws == trace.kappa
            assert sum(trace.da_result.proposals_received) == trace.tau

    def test_domination_holds_every_trial_jpda(self):
        cfg = MarketConfig(n=40, alpha=0.25, d=5.0, model=Model.JOB_LISTS, seed=0)
        for k in range(200):
            trace = run_coupled_da_bins(cfg, Side.JPDA, rng=stream(72, k))
            assert trace.tau <= trace.kappa
            assert all(j <= b for j, b in trace.proposals_vs_balls)
            assert len(trace.proposals_vs_balls) == cfg.m  # bins are candidates

    def test_untouched_receivers_have_empty_bins(self):
        cfg = MarketConfig(n=60, alpha=0.0, d=4.0, model=Model.CANDIDATE_LISTS, seed=0)
        for k in range(100):
            trace = run_coupled_da_bins(cfg, Side.CPDA, rng=stream(73, k))
            for j, b in trace.proposals_vs_balls:
                if j == 0:
                    assert b == 0  # a wasted throw needs a previously-tried receiver

    def test_single_proposal_lists_waste_nothing(self):
        # With one-entry lists nobody ever re-proposes, so every throw lands.
        cfg = MarketConfig(n=30, alpha=0.0, d=1.0, model=Model.CANDIDATE_LISTS, seed=0)
        for k in range(50):
            trace = run_coupled_da_bins(cfg, Side.CPDA, rng=stream(74, k))
            assert trace.tau == trace.kappa

    def test_qf_gap_bound_on_extended_trajectory(self):
        # Keep throwing past the DA's end: the q_F gap between proposals and
        # balls is controlled by the extra throws, (t - tau)/n per unit.
        cfg = MarketConfig(n=80, alpha=0.0, d=8.0, model=Model.CANDIDATE_LISTS, seed=0)
        for k in range(50):
            rng = stream(75, k)
            trace = run_coupled_da_bins(cfg, Side.CPDA, rng=rng)
            n = cfg.n
            extra = int(rng.integers(0, 200))
            counts = trace.occupancy.counts.copy()
            ids = rng.integers(0, n, size=extra)
            counts += np.bincount(ids, minlength=n)
            t = trace.kappa + extra
            j = np.array([p for p, _ in trace.proposals_vs_balls])
            gap = float(np.mean(1.0 / (j + 1) - 1.0 / (counts + 1)))
            assert -1e-12 <= gap <= (t - trace.tau) / n + 1e-12

    def test_mean_kappa_jpda_bounded_by_occupancy_log(self):
        # Total throws until the run ends, against (1+gamma/2) m ln((1+a)/(a+1/m)).
        n, alpha, d, trials, gamma = 300, 0.1, 25.0, 60, 0.4
        cfg = MarketConfig(n=n, alpha=alpha, d=d, model=Model.JOB_LISTS, seed=0)
        m = cfg.m
        total = 0
        for k in range(trials):
            total += run_coupled_da_bins(cfg, Side.JPDA, rng=stream(76, k)).kappa
        bound = (1 + gamma / 2) * m * math.log((1 + alpha) / (alpha + 1.0 / m))
        assert total / trials <= bound
