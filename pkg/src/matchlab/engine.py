"""Deferred acceptance over explicit and lazy instances.

The proposer loop follows the textbook single-proposal step: the unmatched
proposer earliest in the order proposes to the best entry it has not tried
yet; a receiver holds at most one proposer and trades up. Because the
proposer bumped at step t is always the earliest unmatched one, the loop
only needs a single "pending" slot plus a frontier into the order -- no
priority queue.

The lazy runner never materializes lists: each next proposal is drawn
uniformly from the receivers this proposer has not tried (by rejection
sampling over uniform "ball throws", which is also exactly the coupling
the balls-in-bins module records), and receiver-side comparisons use an
i.i.d. uniform priority drawn at first contact. Memory is O(m + n + tau).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import InternalInvariantError, ParameterError, StructuralError
from .models import MarketConfig, MarketInstance, Model, Representation, sample_market
from .rng import stream

_BUF = 16384  # uniforms drawn per refill in the lazy hot loop

# Hard cap on proposals: DA provably makes at most one proposal per
# (proposer, receiver) pair, so anything past m*n is a defect.


class Side(Enum):
    CPDA = "cpda"  # candidates propose
    JPDA = "jpda"  # jobs propose


class Outcome(Enum):
    ACCEPTED_FREE = "accepted_free"
    ACCEPTED_DISPLACING = "accepted_displacing"
    REJECTED = "rejected"


@dataclass(frozen=True)
class ProposalEvent:
    """One proposal: time step t (1-based), who proposed to whom, and how it went."""

    t: int
    proposer: int
    proposee: int
    outcome: Outcome
    displaced: int | None = None


class ChainTermination(Enum):
    UNMATCHED_RECEIVER_ACCEPTS = "unmatched_receiver_accepts"
    PROPOSER_EXHAUSTED = "proposer_exhausted"


@dataclass(frozen=True)
class RejectionChain:
    """A maximal displacement cascade in the proposal log.

    ``events`` lists (proposer-side agent, receiver, "accept"|"reject")
    entries; a displacing proposal contributes an accept entry for the
    newcomer and a reject entry for the agent it bumped.
    """

    start_t: int
    events: tuple[tuple[int, int, str], ...]
    termination: ChainTermination
    max_consecutive_rejections: int


@dataclass
class DAResult:
    """Everything one DA run produced.

    ``matching`` maps job id to candidate id regardless of which side
    proposed. ``proposal_log`` is None when the run was asked not to keep
    a trace (the counters and matching are always kept).
    """

    side: Side
    n_proposers: int
    n_receivers: int
    matching: dict[int, int]
    proposal_log: list[ProposalEvent] | None
    proposals_made: list[int]
    proposals_received: list[int]
    unmatched_proposers: set[int]
    unmatched_receivers: set[int]
    total_proposals: int

    def is_perfect(self, n_short: int) -> bool:
        return len(self.matching) >= n_short


def _orient(market: MarketInstance, side: Side):
    if side == Side.CPDA:
        return market.candidate_lists, market.job_lists
    return market.job_lists, market.candidate_lists


def _finish(
    side: Side,
    n_prop: int,
    n_recv: int,
    holder: list[int],
    log: list[ProposalEvent] | None,
    made: list[int],
    received: list[int],
    total: int,
) -> DAResult:
    matched_props = set()
    matching: dict[int, int] = {}
    for r, p in enumerate(holder):
        if p >= 0:
            matched_props.add(p)
            if side == Side.CPDA:
                matching[r] = p
            else:
                matching[p] = r
    return DAResult(
        side=side,
        n_proposers=n_prop,
        n_receivers=n_recv,
        matching=matching,
        proposal_log=log,
        proposals_made=made,
        proposals_received=received,
        unmatched_proposers={p for p in range(n_prop) if p not in matched_props},
        unmatched_receivers={r for r in range(n_recv) if holder[r] < 0},
        total_proposals=total,
    )


def run_da(
    market: MarketInstance,
    side: Side = Side.CPDA,
    order: Sequence[int] | None = None,
    record_trace: bool = True,
) -> DAResult:
    """Run deferred acceptance on an explicit instance.

    ``order`` is a permutation of the proposing side (default identity);
    by the order-invariance property the matching and the multiset of
    proposals do not depend on it, but the trace does.
    """
    if market.representation != Representation.EXPLICIT:
        raise ParameterError("run_da needs an explicit instance; use run_da_lazy")
    prop_lists, recv_lists = _orient(market, side)
    n_prop, n_recv = len(prop_lists), len(recv_lists)
    if order is None:
        order = range(n_prop)
    else:
        if sorted(order) != list(range(n_prop)):
            raise ParameterError("order must be a permutation of the proposing side")

    rank = [
        {p: i for i, p in enumerate(lst)} for lst in recv_lists
    ]  # receiver -> proposer -> position

    holder = [-1] * n_recv
    holder_rank = [0] * n_recv
    ptr = [0] * n_prop
    made = [0] * n_prop
    received = [0] * n_recv
    log: list[ProposalEvent] | None = [] if record_trace else None
    total = 0
    cap = n_prop * n_recv

    order_it = iter(order)
    current = -1
    while True:
        if current < 0:
            current = next(order_it, -1)
            if current < 0:
                break
        c = current
        k = ptr[c]
        lst = prop_lists[c]
        if k == len(lst):
            current = -1  # exhausted: stays unmatched for good
            continue
        j = lst[k]
        ptr[c] = k + 1
        made[c] += 1
        received[j] += 1
        total += 1
        if total > cap:
            raise InternalInvariantError("proposal count exceeded m*n cap")

        my_rank = rank[j].get(c)
        h = holder[j]
        if my_rank is None:
            # c is not on j's list (one-sided edge): j never accepts.
            outcome, displaced = Outcome.REJECTED, None
        elif h < 0:
            holder[j] = c
            holder_rank[j] = my_rank
            outcome, displaced = Outcome.ACCEPTED_FREE, None
            current = -1
        elif my_rank < holder_rank[j]:
            holder[j] = c
            holder_rank[j] = my_rank
            outcome, displaced = Outcome.ACCEPTED_DISPLACING, h
            current = h
        else:
            outcome, displaced = Outcome.REJECTED, None

        if log is not None:
            log.append(ProposalEvent(total, c, j, outcome, displaced))

    return _finish(side, n_prop, n_recv, holder, log, made, received, total)


def _lazy_side_params(config: MarketConfig, side: Side) -> tuple[int, int, int]:
    if side == Side.CPDA:
        if config.model != Model.CANDIDATE_LISTS:
            raise ParameterError("lazy CPDA requires the candidate-lists model")
        return config.m, config.n, config.list_length
    if config.model != Model.JOB_LISTS:
        raise ParameterError("lazy JPDA requires the job-lists model")
    return config.n, config.m, config.list_length


def _lazy_da(
    n_prop: int,
    n_recv: int,
    list_len: int,
    rng: np.random.Generator,
    record_trace: bool = False,
    bin_counts: list[int] | None = None,
    checkpoints: Sequence[int] | None = None,
):
    """Core lazy DA loop.

    Returns (holder, log, made, received, total, kappa, checkpoint_counts)
    where kappa is the number of ball throws spent generating proposals
    (equal to total when bin_counts is None is *not* guaranteed: wasted
    throws hit already-tried receivers) and checkpoint_counts[i] is the
    number of receivers still without any proposal when the total proposal
    count first reached checkpoints[i].
    """
    holder = [-1] * n_recv
    holder_pri = [1.0] * n_recv
    tried: list[set[int] | None] = [None] * n_prop
    made = [0] * n_prop
    received = [0] * n_recv
    log: list[ProposalEvent] | None = [] if record_trace else None
    total = 0
    kappa = 0
    cap = n_prop * n_recv

    cps = sorted(checkpoints) if checkpoints else []
    cp_idx = 0
    cp_counts: list[int] = []
    untouched = n_recv
    while cp_idx < len(cps) and cps[cp_idx] <= 0:
        cp_counts.append(untouched)
        cp_idx += 1

    buf = rng.random(_BUF).tolist()
    pos = 0
    current = -1
    frontier = 0

    while True:
        if current < 0:
            if frontier == n_prop:
                break
            current = frontier
            frontier += 1
        c = current
        k = made[c]
        if k == list_len:
            current = -1
            continue

        ts = tried[c]
        if ts is None:
            ts = set()
            tried[c] = ts
        # Rejection-sample a receiver c has not tried; every throw is a
        # ball into the receiver bins.
        while True:
            u = buf[pos]
            pos += 1
            if pos == _BUF:
                buf = rng.random(_BUF).tolist()
                pos = 0
            j = int(u * n_recv)
            kappa += 1
            if bin_counts is not None:
                bin_counts[j] += 1
            if j not in ts:
                break
        ts.add(j)
        made[c] = k + 1
        if received[j] == 0:
            untouched -= 1
        received[j] += 1
        total += 1
        if total > cap:
            raise InternalInvariantError("proposal count exceeded m*n cap")

        p = buf[pos]  # priority of the (j, c) pair, drawn at first contact
        pos += 1
        if pos == _BUF:
            buf = rng.random(_BUF).tolist()
            pos = 0

        h = holder[j]
        if h < 0:
            holder[j] = c
            holder_pri[j] = p
            outcome, displaced = Outcome.ACCEPTED_FREE, None
            current = -1
        elif p < holder_pri[j] or (p == holder_pri[j] and c < h):
            holder[j] = c
            holder_pri[j] = p
            outcome, displaced = Outcome.ACCEPTED_DISPLACING, h
            current = h
        else:
            outcome, displaced = Outcome.REJECTED, None

        if log is not None:
            log.append(ProposalEvent(total, c, j, outcome, displaced))
        while cp_idx < len(cps) and total == cps[cp_idx]:
            cp_counts.append(untouched)
            cp_idx += 1

    # Runs shorter than a checkpoint report the final untouched count.
    while cp_idx < len(cps):
        cp_counts.append(untouched)
        cp_idx += 1
    return holder, log, made, received, total, kappa, cp_counts


def run_da_lazy(
    config: MarketConfig,
    side: Side = Side.CPDA,
    rng: np.random.Generator | None = None,
    record_trace: bool = False,
) -> DAResult:
    """Run DA on a freshly drawn list-model market without materializing it.

    The returned DAResult is distributed identically to sampling an
    explicit instance with the same config and running :func:`run_da`.
    """
    n_prop, n_recv, list_len = _lazy_side_params(config, side)
    if rng is None:
        rng = stream(config.seed)
    holder, log, made, received, total, _, _ = _lazy_da(
        n_prop, n_recv, list_len, rng, record_trace=record_trace
    )
    return _finish(side, n_prop, n_recv, holder, log, made, received, total)


def extract_rejection_chains(result: DAResult) -> list[RejectionChain]:
    """Partition a full proposal log into maximal rejection chains.

    A chain continues exactly while the next proposal comes from the agent
    the previous proposal bumped; it ends when an unmatched receiver
    accepts, or when the bumped agent never proposes again (exhausted).
    """
    log = result.proposal_log
    if log is None:
        raise StructuralError("result carries no proposal log (trace was off)")
    for i, ev in enumerate(log):
        if ev.t != i + 1:
            raise StructuralError(f"log time steps not consecutive at index {i}")
        if (ev.displaced is not None) != (ev.outcome == Outcome.ACCEPTED_DISPLACING):
            raise StructuralError(f"displaced field inconsistent at t={ev.t}")

    chains: list[RejectionChain] = []
    i = 0
    n_events = len(log)
    while i < n_events:
        start = log[i].t
        entries: list[tuple[int, int, str]] = []
        max_run = 0
        run = 0
        termination = None
        while True:
            ev = log[i]
            if ev.outcome == Outcome.ACCEPTED_FREE:
                entries.append((ev.proposer, ev.proposee, "accept"))
                run = 0
                bumped = None
            elif ev.outcome == Outcome.ACCEPTED_DISPLACING:
                entries.append((ev.proposer, ev.proposee, "accept"))
                entries.append((ev.displaced, ev.proposee, "reject"))
                run = 0
                bumped = ev.displaced
            else:
                entries.append((ev.proposer, ev.proposee, "reject"))
                run += 1
                if run > max_run:
                    max_run = run
                bumped = ev.proposer
            i += 1
            if bumped is None:
                termination = ChainTermination.UNMATCHED_RECEIVER_ACCEPTS
                break
            if i == n_events or log[i].proposer != bumped:
                # The bumped agent never proposed again: list exhausted.
                termination = ChainTermination.PROPOSER_EXHAUSTED
                break
        chains.append(
            RejectionChain(
                start_t=start,
                events=tuple(entries),
                termination=termination,
                max_consecutive_rejections=max_run,
            )
        )
    return chains


def continue_rejecting(
    config: MarketConfig,
    probe_agent: int,
    rng: np.random.Generator | None = None,
) -> list[tuple[int, int]]:
    """Run JPDA with one candidate rejecting every offer it receives.

    Samples an explicit job-lists market from ``config``, then runs the
    job-proposing DA in which ``probe_agent`` turns everything down (the
    run simply continues). Returns the offers the probe received, in
    arrival order, as (job id, rank of that job on the probe's own list);
    the minimum rank equals the probe's best stable-partner rank.
    """
    if config.model != Model.JOB_LISTS:
        raise ParameterError("continue_rejecting probes the job-lists model")
    if not (0 <= probe_agent < config.m):
        raise ParameterError(f"probe candidate {probe_agent} out of range")
    market = sample_market(config, rng=rng)

    prop_lists, recv_lists = _orient(market, Side.JPDA)
    n_prop, n_recv = len(prop_lists), len(recv_lists)
    rank = [{p: i for i, p in enumerate(lst)} for lst in recv_lists]

    offers: list[tuple[int, int]] = []
    holder = [-1] * n_recv
    holder_rank = [0] * n_recv
    ptr = [0] * n_prop
    current = -1
    frontier = 0
    while True:
        if current < 0:
            if frontier == n_prop:
                break
            current = frontier
            frontier += 1
        jb = current
        k = ptr[jb]
        lst = prop_lists[jb]
        if k == len(lst):
            current = -1
            continue
        cand = lst[k]
        ptr[jb] = k + 1
        my_rank = rank[cand].get(jb)
        if cand == probe_agent:
            offers.append((jb, my_rank + 1))
            continue  # probe rejects; jb proposes again next iteration
        h = holder[cand]
        if my_rank is None:
            continue
        if h < 0:
            holder[cand] = jb
            holder_rank[cand] = my_rank
            current = -1
        elif my_rank < holder_rank[cand]:
            holder[cand] = jb
            holder_rank[cand] = my_rank
            current = h
        # else rejected: jb proposes again
    return offers


# ---------------------------------------------------------------------------
# Trace export: line-delimited proposal records and one JSON object per
# rejection chain, consumed by the CLI `verify --trace` path.
# ---------------------------------------------------------------------------


def write_trace(log: Iterable[ProposalEvent], out: TextIO) -> None:
    for ev in log:
        base = f"{ev.t} {ev.proposer} {ev.proposee} {ev.outcome.value}"
        if ev.displaced is not None:
            base += f" {ev.displaced}"
        out.write(base + "\n")


def write_chains(chains: Iterable[RejectionChain], out: TextIO) -> None:
    for ch in chains:
        out.write(
            json.dumps(
                {
                    "start_t": ch.start_t,
                    "events": [list(e) for e in ch.events],
                    "termination": ch.termination.value,
                    "max_consecutive_rejections": ch.max_consecutive_rejections,
                },
                separators=(",", ":"),
            )
            + "\n"
        )
