"""Stability oracle: blocking pairs, enumeration, ranks, lone wolf."""

import pytest

from matchlab import (
    BlockingPair,
    BlockingReason,
    MarketConfig,
    MarketInstance,
    Matching,
    Model,
    ScaleError,
    Side,
    StructuralError,
    best_stable_rank,
    cpda_candidate_ranks,
    enumerate_stable_matchings,
    find_blocking_pairs,
    is_perfect,
    run_da,
)
from matchlab.rng import stream

from .helpers import random_small_market


def two_by_two():
    cfg = MarketConfig(n=2, alpha=0.0, d=2.0, model=Model.CANDIDATE_LISTS, seed=0)
    return MarketInstance(cfg, [[0, 1], [0, 1]], [[0, 1], [0, 1]])


def latin_square_3():
    """The classic 3x3 instance with three stable matchings."""
    cfg = MarketConfig(n=3, alpha=0.0, d=3.0, model=Model.CANDIDATE_LISTS, seed=0)
    cand = [[0, 1, 2], [1, 2, 0], [2, 0, 1]]
    jobs = [[1, 2, 0], [2, 0, 1], [0, 1, 2]]
    return MarketInstance(cfg, cand, jobs)


class TestBlockingPairs:
    def test_da_output_has_none(self):
        for trial in range(50):
            inst = random_small_market(51, trial)
            res = run_da(inst)
            assert find_blocking_pairs(inst, Matching.from_da(res.matching)) == []

    def test_swapped_two_by_two_blocks(self):
        inst = two_by_two()
        pairs = find_blocking_pairs(inst, Matching([(0, 1), (1, 0)]))
        assert BlockingPair(0, 0, BlockingReason.MUTUAL_PREFERENCE) in pairs

    def test_empty_matching_blocks_on_any_edge(self):
        inst = two_by_two()
        pairs = find_blocking_pairs(inst, Matching([]))
        assert len(pairs) == 4  # every edge blocks
        assert all(p.reason == BlockingReason.MUTUAL_PREFERENCE for p in pairs)

    def test_non_edge_pair_rejected(self):
        cfg = MarketConfig(n=2, alpha=0.0, d=1.0, model=Model.CANDIDATE_LISTS, seed=0)
        inst = MarketInstance(cfg, [[0], [1]], [[0], [1]])
        with pytest.raises(StructuralError):
            find_blocking_pairs(inst, Matching([(0, 1)]))

    def test_one_sided_pair_fires_prefers_unmatched(self):
        # (c1, j0): j0 lists c1, but c1's own list omits j0, so c1 prefers
        # staying unmatched (reason b); similarly for the job-side variant.
        cfg = MarketConfig(n=2, alpha=0.0, d=2.0, model=Model.CANDIDATE_LISTS, seed=0)
        inst = MarketInstance(cfg, [[0], [1]], [[0, 1], [1]])
        pairs = find_blocking_pairs(inst, Matching([(1, 0)]))
        assert BlockingPair(1, 0, BlockingReason.CANDIDATE_PREFERS_UNMATCHED) in pairs

    def test_matching_must_be_one_to_one(self):
        with pytest.raises(StructuralError):
            Matching([(0, 0), (0, 1)])
        with pytest.raises(StructuralError):
            Matching([(0, 0), (1, 0)])


class TestIsPerfect:
    def test_size_thresholds(self):
        assert is_perfect(Matching([(0, 0), (1, 1)]), 2)
        assert not is_perfect(Matching([(0, 0)]), 2)

    def test_cpda_result_equivalence(self):
        for trial in range(40):
            inst = random_small_market(52, trial)
            res = run_da(inst)
            mu = Matching.from_da(res.matching)
            assert is_perfect(mu, inst.n) == (len(res.unmatched_receivers) == 0)


class TestEnumeration:
    def test_two_by_two_unique(self):
        stable = enumerate_stable_matchings(two_by_two())
        assert stable == {Matching([(0, 0), (1, 1)])}

    def test_latin_square_three_stable(self):
        stable = enumerate_stable_matchings(latin_square_3())
        assert len(stable) == 3
        assert Matching([(0, 0), (1, 1), (2, 2)]) in stable  # candidate optimal
        assert Matching([(0, 1), (1, 2), (2, 0)]) in stable  # the rotation
        assert Matching([(0, 2), (1, 0), (2, 1)]) in stable  # job optimal

    def test_no_edges_gives_empty_matching_only(self):
        cfg = MarketConfig(n=2, alpha=0.0, d=1.0, model=Model.CANDIDATE_LISTS, seed=0)
        inst = MarketInstance(cfg, [[], []], [[], []])
        assert enumerate_stable_matchings(inst) == {Matching([])}

    def test_scale_guard(self):
        cfg = MarketConfig(n=9, alpha=0.0, d=2.0, model=Model.CANDIDATE_LISTS, seed=0)
        inst = MarketInstance(cfg, [[] for _ in range(9)], [[] for _ in range(9)])
        with pytest.raises(ScaleError):
            enumerate_stable_matchings(inst)

    def test_every_enumerated_matching_is_stable_and_maximal(self):
        for trial in range(30):
            inst = random_small_market(53, trial)
            for mu in enumerate_stable_matchings(inst):
                assert find_blocking_pairs(inst, mu) == []


class TestOracleAgreement:
    def test_cpda_candidate_optimal_job_pessimal(self):
        for trial in range(60):
            inst = random_small_market(54, trial)
            stable = enumerate_stable_matchings(inst)
            res = run_da(inst, Side.CPDA)
            mu = Matching.from_da(res.matching)
            assert mu in stable
            ranks = cpda_candidate_ranks(inst)
            for c in range(inst.m):
                best = [
                    inst.candidate_lists[c].index(s.job_of(c)) + 1
                    for s in stable
                    if s.job_of(c) is not None
                ]
                assert ranks[c] == (min(best) if best else None)
            for j in range(inst.n):
                worst = [
                    inst.job_lists[j].index(s.candidate_of(j)) + 1
                    for s in stable
                    if s.candidate_of(j) is not None
                ]
                got = (
                    inst.job_lists[j].index(mu.candidate_of(j)) + 1
                    if mu.candidate_of(j) is not None
                    else None
                )
                assert got == (max(worst) if worst else None)

    def test_lone_wolf_across_stable_set_and_sides(self):
        for trial in range(60):
            inst = random_small_market(55, trial)
            stable = enumerate_stable_matchings(inst)
            unmatched_jobs = {
                frozenset(j for j in range(inst.n) if s.candidate_of(j) is None) for s in stable
            }
            unmatched_cands = {
                frozenset(c for c in range(inst.m) if s.job_of(c) is None) for s in stable
            }
            assert len(unmatched_jobs) == 1 and len(unmatched_cands) == 1
            res_c = run_da(inst, Side.CPDA)
            res_j = run_da(inst, Side.JPDA)
            assert frozenset(res_c.unmatched_receivers) in unmatched_jobs
            assert frozenset(j for j in range(inst.n) if j not in res_j.matching) in unmatched_jobs
            assert frozenset(res_c.unmatched_proposers) in unmatched_cands

    def test_perfection_constant_across_stable_set(self):
        for trial in range(40):
            inst = random_small_market(56, trial)
            stable = enumerate_stable_matchings(inst)
            res = run_da(inst, Side.CPDA)
            flags = {is_perfect(s, inst.n) for s in stable}
            assert len(flags) == 1
            assert is_perfect(Matching.from_da(res.matching), inst.n) in flags


class TestBestStableRank:
    def test_rank_one_when_top_choice_stable(self):
        inst = latin_square_3()
        # job-optimal stable matching gives each job its first choice
        for j in range(3):
            assert best_stable_rank(inst, j) == 1

    def test_matches_enumeration_min(self):
        for trial in range(100):
            inst = random_small_market(57, trial)
            stable = enumerate_stable_matchings(inst)
            for j in range(inst.n):
                best = [
                    inst.job_lists[j].index(s.candidate_of(j)) + 1
                    for s in stable
                    if s.candidate_of(j) is not None
                ]
                assert best_stable_rank(inst, j) == (min(best) if best else None)

    def test_unmatched_job_consistent_with_lone_wolf(self):
        for trial in range(40):
            inst = random_small_market(58, trial)
            res = run_da(inst, Side.CPDA)
            stable = enumerate_stable_matchings(inst)
            for j in res.unmatched_receivers:
                assert best_stable_rank(inst, j) is None
                assert all(s.candidate_of(j) is None for s in stable)

    def test_job_id_range(self):
        with pytest.raises(StructuralError):
            best_stable_rank(two_by_two(), 7)
