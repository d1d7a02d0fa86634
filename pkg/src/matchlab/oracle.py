"""Stability checking, desk-scale enumeration, and stable-partner ranks.

The enumerator is a ground-truth oracle: it walks every matching of the
instance graph and keeps the ones with no blocking pair. It is guarded at
8x8 agents -- past that its whole point (cheap, obviously-correct ground
truth) is gone.

Ranks are 1-based positions on an agent's own list throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .engine import Side, run_da
from .errors import ScaleError, StructuralError
from .models import MarketInstance

ENUMERATION_GUARD = 8


class BlockingReason(Enum):
    MUTUAL_PREFERENCE = "mutual_preference"
    CANDIDATE_PREFERS_UNMATCHED = "candidate_prefers_unmatched"
    JOB_PREFERS_UNMATCHED = "job_prefers_unmatched"


@dataclass(frozen=True)
class BlockingPair:
    candidate: int
    job: int
    reason: BlockingReason


class Matching:
    """An immutable one-to-one set of (candidate, job) pairs."""

    __slots__ = ("pairs", "_by_candidate", "_by_job")

    def __init__(self, pairs: Iterable[tuple[int, int]]):
        frozen = frozenset((int(c), int(j)) for c, j in pairs)
        by_c: dict[int, int] = {}
        by_j: dict[int, int] = {}
        for c, j in sorted(frozen):
            if c in by_c or j in by_j:
                raise StructuralError(f"matching is not one-to-one at pair ({c}, {j})")
            by_c[c] = j
            by_j[j] = c
        self.pairs = frozen
        self._by_candidate = by_c
        self._by_job = by_j

    def candidate_of(self, job: int) -> int | None:
        return self._by_job.get(job)

    def job_of(self, candidate: int) -> int | None:
        return self._by_candidate.get(candidate)

    def __len__(self) -> int:
        return len(self.pairs)

    def __eq__(self, other) -> bool:
        return isinstance(other, Matching) and self.pairs == other.pairs

    def __hash__(self) -> int:
        return hash(self.pairs)

    def __repr__(self) -> str:
        return f"Matching({sorted(self.pairs)})"

    @classmethod
    def from_da(cls, matching: dict[int, int]) -> "Matching":
        """From the engine's job -> candidate map."""
        return cls((c, j) for j, c in matching.items())


def find_blocking_pairs(market: MarketInstance, matching: Matching) -> list[BlockingPair]:
    """All blocking pairs of ``matching`` on ``market``.

    A pair (c, j) blocks when both prefer each other to their current
    assignment, where an unmatched agent prefers any partner on its list.
    An agent matched to a partner missing from its own list prefers being
    unmatched, which also blocks. Pairs in the matching that appear on
    neither side's list are rejected as structural errors.
    """
    cand_lists = market.candidate_lists
    job_lists = market.job_lists
    cand_rank = [{j: i for i, j in enumerate(lst)} for lst in cand_lists]
    job_rank = [{c: i for i, c in enumerate(lst)} for lst in job_lists]

    for c, j in matching.pairs:
        if c < 0 or c >= market.m or j < 0 or j >= market.n:
            raise StructuralError(f"matched pair ({c}, {j}) out of range")
        if j not in cand_rank[c] and c not in job_rank[j]:
            raise StructuralError(f"matched pair ({c}, {j}) is not an edge")

    blocking: list[BlockingPair] = []
    for c, j in sorted(matching.pairs):
        if j not in cand_rank[c]:
            blocking.append(BlockingPair(c, j, BlockingReason.CANDIDATE_PREFERS_UNMATCHED))
        if c not in job_rank[j]:
            blocking.append(BlockingPair(c, j, BlockingReason.JOB_PREFERS_UNMATCHED))

    for c in range(market.m):
        j_cur = matching.job_of(c)
        # Jobs c strictly prefers to its assignment (its whole list if unmatched).
        cutoff = cand_rank[c].get(j_cur, len(cand_lists[c])) if j_cur is not None else len(cand_lists[c])
        for j in cand_lists[c][:cutoff]:
            c_cur = matching.candidate_of(j)
            jr = job_rank[j]
            if c not in jr:
                continue
            if c_cur is None or jr[c] < jr.get(c_cur, len(job_lists[j])):
                blocking.append(BlockingPair(c, j, BlockingReason.MUTUAL_PREFERENCE))
    return blocking


def is_perfect(matching: Matching, n: int) -> bool:
    """Does the matching cover all n short-side agents (jobs)?"""
    return len(matching) >= n


def enumerate_stable_matchings(market: MarketInstance) -> set[Matching]:
    """Every stable matching of a desk-scale instance, by brute force.

    Walks all matchings contained in the instance graph (assigning each
    candidate either nothing or a free job from its list) and filters with
    :func:`find_blocking_pairs`.
    """
    n, m = market.n, market.m
    if n > ENUMERATION_GUARD or m > ENUMERATION_GUARD:
        raise ScaleError(
            f"enumeration is guarded at {ENUMERATION_GUARD}x{ENUMERATION_GUARD} agents, got {m}x{n}"
        )
    cand_lists = market.candidate_lists
    stable: set[Matching] = set()
    taken = [False] * n
    assigned: list[tuple[int, int]] = []

    def rec(c: int) -> None:
        if c == m:
            mu = Matching(assigned)
            if not find_blocking_pairs(market, mu):
                stable.add(mu)
            return
        rec(c + 1)  # c stays unmatched
        for j in cand_lists[c]:
            if not taken[j]:
                taken[j] = True
                assigned.append((c, j))
                rec(c + 1)
                assigned.pop()
                taken[j] = False

    rec(0)
    return stable


def _truncate_job_list(market: MarketInstance, job: int, keep: int) -> MarketInstance:
    """Copy of the market where ``job`` keeps only its top ``keep`` entries."""
    kept = set(market.job_lists[job][:keep])
    cand_lists = [
        [j for j in lst if j != job or c in kept]
        for c, lst in enumerate(market.candidate_lists)
    ]
    job_lists = list(market.job_lists)
    job_lists[job] = market.job_lists[job][:keep]
    return MarketInstance(market.config, cand_lists, job_lists, market.representation)


def best_stable_rank(market: MarketInstance, job: int) -> int | None:
    """Rank of the best stable partner ``job`` has in any stable matching.

    Found by truncation: the job has a stable partner within its top i
    entries iff it is still matched by candidate-proposing DA after its
    list is cut to length i. Binary-searches the smallest such i; None if
    the job is unmatched even with its full list (and then, by the Lone
    Wolf property, in every stable matching).
    """
    if not (0 <= job < market.n):
        raise StructuralError(f"job id {job} out of range")
    full = len(market.job_lists[job])
    if full == 0:
        return None

    def matched_with(keep: int) -> bool:
        truncated = _truncate_job_list(market, job, keep)
        return job in run_da(truncated, Side.CPDA, record_trace=False).matching

    if not matched_with(full):
        return None
    lo, hi = 1, full  # invariant: matched_with(hi) is True
    while lo < hi:
        mid = (lo + hi) // 2
        if matched_with(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


def cpda_candidate_ranks(market: MarketInstance) -> list[int | None]:
    """Each candidate's CPDA partner rank (None if unmatched).

    Candidates walk their list top-down, so a matched candidate's rank is
    simply the number of proposals it made; by candidate optimality this
    is also its best stable-partner rank.
    """
    result = run_da(market, Side.CPDA, record_trace=False)
    matched = set(result.matching.values())
    return [
        result.proposals_made[c] if c in matched else None for c in range(market.m)
    ]
