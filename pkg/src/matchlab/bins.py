"""Balls-in-bins processes and their coupling to deferred acceptance.

A lazy DA run *is* a balls-in-bins process: every proposal is generated by
throwing uniform balls at the receiver bins until one lands on a receiver
the proposer has not tried yet. Recording the throws alongside the
proposals gives, for every receiver i, a proposal count j_i dominated by
its ball count b_i, and a total proposal count tau dominated by the total
throw count kappa. Those dominations are deterministic facts of the
coupling, not statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .engine import DAResult, Side, _finish, _lazy_da, _lazy_side_params
from .errors import ParameterError
from .models import MarketConfig
from .rng import stream


@dataclass(frozen=True)
class FixedThrows:
    throws: int


@dataclass(frozen=True)
class OccupiedReaches:
    occupied: int


@dataclass(frozen=True)
class AllOccupied:
    pass


StopRule = Union[FixedThrows, OccupiedReaches, AllOccupied]


@dataclass(frozen=True)
class BinOccupancy:
    """Final state of one process: per-bin counts plus totals."""

    counts: np.ndarray
    throws: int
    occupied: int

    @classmethod
    def from_counts(cls, counts: np.ndarray) -> "BinOccupancy":
        counts = np.asarray(counts, dtype=np.int64)
        return cls(counts=counts, throws=int(counts.sum()), occupied=int(np.count_nonzero(counts)))

    @property
    def empty(self) -> int:
        return self.counts.size - self.occupied


def run_balls_in_bins(
    bins: int, stop: StopRule, seed: int = 0, rng: np.random.Generator | None = None
) -> BinOccupancy:
    """Throw uniform balls into ``bins`` bins until the stop rule fires."""
    if bins < 1:
        raise ParameterError(f"bins must be >= 1, got {bins}")
    if rng is None:
        rng = stream(seed)

    if isinstance(stop, FixedThrows):
        if stop.throws < 0:
            raise ParameterError("throw count must be >= 0")
        ids = rng.integers(0, bins, size=stop.throws)
        return BinOccupancy.from_counts(np.bincount(ids, minlength=bins))

    if isinstance(stop, AllOccupied):
        target = bins
    elif isinstance(stop, OccupiedReaches):
        target = stop.occupied
        if not (0 <= target <= bins):
            raise ParameterError(f"occupancy target {target} out of range 0..{bins}")
    else:
        raise ParameterError(f"unknown stop rule {stop!r}")

    counts = np.zeros(bins, dtype=np.int64)
    occupied = 0
    if target == 0:
        return BinOccupancy.from_counts(counts)
    chunk = max(256, bins)
    while True:
        ids = rng.integers(0, bins, size=chunk)
        # First position in this chunk at which each distinct bin appears.
        first_ids, first_pos = np.unique(ids, return_index=True)
        novel = first_ids[counts[first_ids] == 0]
        novel_pos = np.sort(first_pos[counts[first_ids] == 0])
        if occupied + novel.size >= target:
            cut = novel_pos[target - occupied - 1] + 1  # stop right at the throw that hits target
            counts += np.bincount(ids[:cut], minlength=bins)
            return BinOccupancy.from_counts(counts)
        counts += np.bincount(ids, minlength=bins)
        occupied += novel.size


@dataclass(frozen=True)
class UnmatchedEstimate:
    """Centering values for the short-side unmatched count after tau proposals."""

    exponential: float  # n * exp(-tau/n)
    exact: float  # n * (1 - 1/n)**tau


def unmatched_estimate(n: int, tau: int) -> UnmatchedEstimate:
    """Expected count of jobs with no proposal after ``tau`` uniform proposals.

    The exponential form is the analysis-friendly centering; the exact form
    is the true mean of the idealized uniform process.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    if tau < 0:
        raise ParameterError("tau must be >= 0")
    exact = float(n) if tau == 0 else n * (1.0 - 1.0 / n) ** tau
    return UnmatchedEstimate(exponential=n * math.exp(-tau / n), exact=exact)


def acceptance_prob_estimate(occupancy: BinOccupancy) -> float:
    """The rejection-probability proxy q_F = 1 - mean(1 / (b_i + 1)).

    Computed from a bin occupancy standing in for per-job proposal counts;
    the matching acceptance probability is ``1 - q_F``.
    """
    counts = occupancy.counts
    if counts.size == 0:
        raise ParameterError("occupancy has no bins")
    return float(1.0 - np.mean(1.0 / (counts + 1.0)))


@dataclass(frozen=True)
class CoupledTrace:
    """One DA run with its generating ball throws.

    ``proposals_vs_balls[i] = (j_i, b_i)`` pairs each receiver's proposal
    count with its ball count; ``tau`` and ``kappa`` are their totals. The
    coupling guarantees j_i <= b_i for every receiver and tau <= kappa.
    """

    da_result: DAResult
    occupancy: BinOccupancy
    proposals_vs_balls: list[tuple[int, int]]
    tau: int
    kappa: int


def run_coupled_da_bins(
    config: MarketConfig,
    side: Side = Side.CPDA,
    rng: np.random.Generator | None = None,
    record_trace: bool = False,
) -> CoupledTrace:
    """Run lazy DA while recording every generating ball throw."""
    n_prop, n_recv, list_len = _lazy_side_params(config, side)
    if rng is None:
        rng = stream(config.seed)
    bin_counts = [0] * n_recv
    holder, log, made, received, total, kappa, _ = _lazy_da(
        n_prop, n_recv, list_len, rng, record_trace=record_trace, bin_counts=bin_counts
    )
    result = _finish(side, n_prop, n_recv, holder, log, made, received, total)
    occupancy = BinOccupancy.from_counts(np.asarray(bin_counts, dtype=np.int64))
    return CoupledTrace(
        da_result=result,
        occupancy=occupancy,
        proposals_vs_balls=list(zip(received, bin_counts)),
        tau=total,
        kappa=kappa,
    )


def unmatched_receiver_counts(
    config: MarketConfig,
    side: Side,
    checkpoints: Sequence[int],
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Receivers still without any proposal when each checkpoint is reached.

    ``checkpoints`` are proposal counts; a run that terminates before a
    checkpoint reports its final value there. The empirical companion of
    :func:`unmatched_estimate`.
    """
    n_prop, n_recv, list_len = _lazy_side_params(config, side)
    if rng is None:
        rng = stream(config.seed)
    *_, cp_counts = _lazy_da(n_prop, n_recv, list_len, rng, checkpoints=checkpoints)
    return cp_counts
