"""Random matching-market models and the coupled sandwich sampler.

Three models over ``m`` candidates (long side) and ``n`` jobs (short side),
with ``m = round(n * (1 + alpha))``:

* ``SYMMETRIC``       -- every (candidate, job) edge present independently
  with probability ``d / n``; each side ranks its neighbors uniformly.
* ``CANDIDATE_LISTS`` -- each candidate picks a uniform ordered list of
  ``round(d)`` jobs; each job ranks whoever shows up via i.i.d. uniform
  priority scores (ties broken by candidate index).
* ``JOB_LISTS``       -- the mirror image: jobs pick lists of candidates.

Rounding is half-up everywhere (``m`` and list lengths), so experiments
with fractional ``d`` or ``alpha`` are reproducible. Agent identifiers are
dense integers: candidates ``0..m-1``, jobs ``0..n-1``.

All sampling is a pure function of (config, seed) via a counter-based
Philox stream (see :mod:`matchlab.rng`); instances are immutable after
construction and safe to share across concurrent trials.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, TextIO

import numpy as np

from .errors import ParameterError, StructuralError
from .rng import stream


class Model(Enum):
    SYMMETRIC = "symmetric"
    CANDIDATE_LISTS = "candidate_lists"
    JOB_LISTS = "job_lists"


class SideSet(Enum):
    """Which side's lists a containment statement quantifies over."""

    CANDIDATES = "candidates"
    JOBS = "jobs"


class Representation(Enum):
    EXPLICIT = "explicit"
    LAZY_ORACLE = "lazy_oracle"


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class MarketConfig:
    """Parameters of one random market.

    ``n`` jobs on the short side, ``m = round(n * (1 + alpha))`` candidates,
    and a real-valued degree parameter ``d``: the edge probability is
    ``d / n`` in the symmetric model, while the list models use
    ``round(d)`` capped at the opposite side's size.
    """

    n: int
    alpha: float
    d: float
    model: Model
    seed: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if self.alpha < 0:
            raise ParameterError(f"alpha must be >= 0, got {self.alpha}")
        if self.d <= 0:
            raise ParameterError(f"d must be > 0, got {self.d}")
        if self.model in (Model.SYMMETRIC, Model.CANDIDATE_LISTS):
            if self.d > self.n:
                raise ParameterError(
                    f"d={self.d} exceeds n={self.n} for model {self.model.value}"
                )
        else:  # JOB_LISTS: jobs list candidates, so the cap is m
            if round_half_up(self.d) > self.m:
                raise ParameterError(
                    f"round(d)={round_half_up(self.d)} exceeds m={self.m} for job lists"
                )

    @property
    def m(self) -> int:
        return round_half_up(self.n * (1.0 + self.alpha))

    @property
    def list_length(self) -> int:
        """Per-agent list length in the list models (round(d), capped)."""
        if self.model == Model.JOB_LISTS:
            return min(round_half_up(self.d), self.m)
        return min(round_half_up(self.d), self.n)


@dataclass(frozen=True)
class MarketInstance:
    """One sampled market: ordered preference lists on both sides.

    ``candidate_lists[c]`` ranks jobs most- to least-preferred, and
    ``job_lists[j]`` ranks candidates. In a lazy-oracle instance both are
    empty and preferences are materialized on demand by the DA engine.
    """

    config: MarketConfig
    candidate_lists: list[list[int]]
    job_lists: list[list[int]]
    representation: Representation = Representation.EXPLICIT

    @property
    def n(self) -> int:
        return self.config.n

    @property
    def m(self) -> int:
        return self.config.m

    def edge_count(self) -> int:
        return sum(len(l) for l in self.candidate_lists)


@dataclass(frozen=True)
class SandwichTriple:
    """A jointly sampled (lower, mid, upper) chain of markets.

    ``containment_held`` records whether the list-prefix containment
    actually held for this draw (it fails when some sampled degree falls
    outside the [round(d*(1-delta)), round(d*(1+delta))] window).
    """

    lower: MarketInstance
    mid: MarketInstance
    upper: MarketInstance
    delta: float
    containment_held: bool


def _induced_receiver_lists(
    n_receivers: int,
    proposer_lists: Iterable[Iterable[int]],
    scores: np.ndarray,
) -> list[list[int]]:
    """Receiver-side lists induced by proposer lists and a score table.

    ``scores[r, p]`` is receiver r's priority for proposer p (lower is
    better); ties break toward the lower proposer index.
    """
    recv_flat = []
    prop_flat = []
    for p, lst in enumerate(proposer_lists):
        for r in lst:
            recv_flat.append(r)
            prop_flat.append(p)
    if not recv_flat:
        return [[] for _ in range(n_receivers)]
    recv_arr = np.asarray(recv_flat, dtype=np.int64)
    prop_arr = np.asarray(prop_flat, dtype=np.int64)
    sc = scores[recv_arr, prop_arr]
    order = np.lexsort((prop_arr, sc, recv_arr))
    recv_sorted = recv_arr[order]
    prop_sorted = prop_arr[order]
    bounds = np.searchsorted(recv_sorted, np.arange(n_receivers + 1))
    return [
        prop_sorted[bounds[r] : bounds[r + 1]].tolist() for r in range(n_receivers)
    ]


def _uniform_prefix_rows(rng: np.random.Generator, rows: int, width: int) -> np.ndarray:
    """One uniform permutation of range(width) per row."""
    return np.argsort(rng.random((rows, width)), axis=1, kind="stable")


def sample_market(config: MarketConfig, rng: np.random.Generator | None = None) -> MarketInstance:
    """Sample an explicit instance of the configured model.

    Deterministic given (config, seed): the same inputs yield bitwise
    identical lists. The symmetric sampler materializes dense m-by-n
    randomness, which is fine up to a few thousand agents; the big-n
    experiments use the lazy engine instead.
    """
    n, m = config.n, config.m
    if rng is None:
        rng = stream(config.seed)

    if config.model == Model.SYMMETRIC:
        p = config.d / n
        adj = rng.random((m, n)) < p
        cand_keys = rng.random((m, n))
        job_keys = rng.random((n, m))
        candidate_lists = []
        for c in range(m):
            nb = np.flatnonzero(adj[c])
            candidate_lists.append(nb[np.argsort(cand_keys[c, nb], kind="stable")].tolist())
        job_lists = []
        adj_t = adj.T
        for j in range(n):
            nb = np.flatnonzero(adj_t[j])
            job_lists.append(nb[np.argsort(job_keys[j, nb], kind="stable")].tolist())
        return MarketInstance(config, candidate_lists, job_lists)

    if config.model == Model.CANDIDATE_LISTS:
        ell = config.list_length
        prefixes = _uniform_prefix_rows(rng, m, n)[:, :ell]
        candidate_lists = [row.tolist() for row in prefixes]
        scores = rng.random((n, m))
        job_lists = _induced_receiver_lists(n, candidate_lists, scores)
        return MarketInstance(config, candidate_lists, job_lists)

    # JOB_LISTS
    ell = config.list_length
    prefixes = _uniform_prefix_rows(rng, n, m)[:, :ell]
    job_lists = [row.tolist() for row in prefixes]
    scores = rng.random((m, n))
    candidate_lists = _induced_receiver_lists(m, job_lists, scores)
    return MarketInstance(config, candidate_lists, job_lists)


def lazy_instance(config: MarketConfig) -> MarketInstance:
    """An empty shell instance whose preferences the DA engine draws on demand."""
    if config.model == Model.SYMMETRIC:
        raise ParameterError("lazy representation requires a list model")
    return MarketInstance(
        config,
        [[] for _ in range(config.m)],
        [[] for _ in range(config.n)],
        Representation.LAZY_ORACLE,
    )


def _prefix_agrees(shorter: list[int], longer: list[int]) -> bool:
    return len(shorter) <= len(longer) and shorter == longer[: len(shorter)]


def _shared_order_agrees(list1: list[int], list2: list[int]) -> bool:
    """True iff entries common to both lists appear in the same relative order."""
    pos2 = {a: i for i, a in enumerate(list2)}
    last = -1
    for a in list1:
        i = pos2.get(a)
        if i is None:
            continue
        if i <= last:
            return False
        last = i
    return True


def check_containment(m1: MarketInstance, m2: MarketInstance, side: SideSet) -> bool:
    """Is m1 contained in m2 along ``side``?

    True iff every ``side`` agent's list in m1 is a prefix (content and
    order) of its list in m2, and every opposite-side agent ranks the
    entries shared by its two lists in the same relative order.
    """
    if m1.n != m2.n or m1.m != m2.m:
        raise StructuralError(
            f"agent sets differ: ({m1.m}, {m1.n}) vs ({m2.m}, {m2.n})"
        )
    if side == SideSet.CANDIDATES:
        own1, own2 = m1.candidate_lists, m2.candidate_lists
        other1, other2 = m1.job_lists, m2.job_lists
    else:
        own1, own2 = m1.job_lists, m2.job_lists
        other1, other2 = m1.candidate_lists, m2.candidate_lists

    for l1, l2 in zip(own1, own2):
        if not _prefix_agrees(l1, l2):
            return False
    for l1, l2 in zip(other1, other2):
        if not _shared_order_agrees(l1, l2):
            return False
    return True


def sample_sandwich_triple(
    config: MarketConfig,
    delta: float,
    side: SideSet = SideSet.CANDIDATES,
    rng: np.random.Generator | None = None,
) -> SandwichTriple:
    """Jointly sample list-model instances below and above a symmetric one.

    The three instances share, per proposing agent, one uniform no-repeat
    tuple of partners (prefixes of lengths ``round(d*(1-delta))``, a
    Binomial(n, d/n) draw, and ``round(d*(1+delta))`` respectively) and,
    per opposite-side agent, one total priority order. Containment of the
    triple then holds exactly when every sampled degree lands inside the
    window, which happens with probability at least
    ``1 - 2 * #proposers * exp(-delta^2 d / 3)`` (Chernoff); the flag is
    set by running :func:`check_containment` on both adjacent pairs.
    """
    if not (0.0 < delta < 1.0):
        raise ParameterError(f"delta must be in (0, 1), got {delta}")
    if config.model != Model.SYMMETRIC:
        raise ParameterError("sandwich sampling starts from a symmetric config")
    if rng is None:
        rng = stream(config.seed)
    n, m = config.n, config.m

    if side == SideSet.CANDIDATES:
        n_prop, n_recv = m, n
        d_side = config.d
    else:
        # Jobs see Binomial(m, d/n) neighbors, mean d*m/n, so the job-side
        # sandwich brackets that mean.
        n_prop, n_recv = n, m
        d_side = config.d * m / n

    lo_len = min(round_half_up(d_side * (1.0 - delta)), n_recv)
    up_len = min(round_half_up(d_side * (1.0 + delta)), n_recv)
    degrees = rng.binomial(n_recv, config.d / n, size=n_prop)
    perms = _uniform_prefix_rows(rng, n_prop, n_recv)
    scores = rng.random((n_recv, n_prop))

    def build(lens: np.ndarray, model: Model, d_eff: float) -> MarketInstance:
        prop_lists = [perms[p, : lens[p]].tolist() for p in range(n_prop)]
        recv_lists = _induced_receiver_lists(n_recv, prop_lists, scores)
        sub = MarketConfig(n=n, alpha=config.alpha, d=d_eff, model=model, seed=config.seed)
        if side == SideSet.CANDIDATES:
            return MarketInstance(sub, prop_lists, recv_lists)
        return MarketInstance(sub, recv_lists, prop_lists)

    list_model = Model.CANDIDATE_LISTS if side == SideSet.CANDIDATES else Model.JOB_LISTS
    full = np.full(n_prop, 0, dtype=np.int64)
    lower = build(full + lo_len, list_model, min(d_side * (1.0 - delta), n_recv))
    mid = build(degrees, Model.SYMMETRIC, config.d)
    upper = build(full + up_len, list_model, min(d_side * (1.0 + delta), n_recv))

    held = check_containment(lower, mid, side) and check_containment(mid, upper, side)
    return SandwichTriple(lower=lower, mid=mid, upper=upper, delta=delta, containment_held=held)


# ---------------------------------------------------------------------------
# Instance dump/load: line-oriented text format used by the CLI and golden
# tests. Header "n m model d alpha seed", then one line per candidate and
# per job, "id: partner partner ...", candidates first.
# ---------------------------------------------------------------------------


def dump_instance(instance: MarketInstance, out: TextIO) -> None:
    cfg = instance.config
    out.write(
        f"{cfg.n} {cfg.m} {cfg.model.value} {cfg.d!r} {cfg.alpha!r} {cfg.seed}\n"
    )
    for c, lst in enumerate(instance.candidate_lists):
        out.write(f"{c}: {' '.join(map(str, lst))}".rstrip() + "\n")
    for j, lst in enumerate(instance.job_lists):
        out.write(f"{j}: {' '.join(map(str, lst))}".rstrip() + "\n")


def load_instance(inp: TextIO) -> MarketInstance:
    header = inp.readline().split()
    if len(header) != 6:
        raise StructuralError(f"bad instance header: {header!r}")
    n, m = int(header[0]), int(header[1])
    try:
        model = Model(header[2])
    except ValueError as exc:
        raise StructuralError(f"unknown model token {header[2]!r}") from exc
    d, alpha, seed = float(header[3]), float(header[4]), int(header[5])
    config = MarketConfig(n=n, alpha=alpha, d=d, model=model, seed=seed)
    if config.m != m:
        raise StructuralError(f"header m={m} disagrees with round(n*(1+alpha))={config.m}")

    def read_block(count: int, limit: int, label: str) -> list[list[int]]:
        block = []
        for i in range(count):
            line = inp.readline()
            if not line:
                raise StructuralError(f"truncated dump: missing {label} line {i}")
            head, _, rest = line.partition(":")
            if int(head) != i:
                raise StructuralError(f"{label} lines out of order at {head!r}")
            ids = [int(tok) for tok in rest.split()]
            if len(set(ids)) != len(ids):
                raise StructuralError(f"duplicate entry in {label} {i} list")
            if any(x < 0 or x >= limit for x in ids):
                raise StructuralError(f"{label} {i} lists an out-of-range partner")
            block.append(ids)
        return block

    candidate_lists = read_block(m, n, "candidate")
    job_lists = read_block(n, m, "job")
    return MarketInstance(config, candidate_lists, job_lists)
