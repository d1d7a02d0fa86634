"""Monte Carlo experiment orchestration and CSV reporting.

Trials are embarrassingly parallel: trial k always runs on the stream
keyed by (base seed, experiment-local point key, k), and results are
folded in trial-index order, so the numbers -- and the CSV bytes -- are
identical whether the worker pool has 1 process or 16.

Finite-n caveats: the threshold and rank statements this module probes are
asymptotic. The comparisons carried out here use explicit slack factors
(recorded in the reports) as engineering surrogates for the vanishing
epsilon/gamma terms; they are direction checks, not proofs.
"""

from __future__ import annotations

import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

from .engine import Side, run_da_lazy
from .errors import ParameterError
from .game import GameParams, GameSimResult, wilson_interval
from .models import MarketConfig, Model
from .rng import stream

# Stream-path tags keeping per-purpose trial streams disjoint.
_TAG_PERFECT = 101
_TAG_RANK = 102


def _fmt(x: float) -> str:
    """Fixed 9-significant-digit float formatting for bit-stable CSV output."""
    return "%.9g" % x


def model_for_side(side: Side) -> Model:
    return Model.CANDIDATE_LISTS if side == Side.CPDA else Model.JOB_LISTS


def predicted_threshold(n: float, alpha: float) -> float:
    """The critical degree ln(n) * ln((1+alpha) / (alpha + 1/(n*(1+alpha)))).

    At alpha = 0 this reduces to ln(n)**2.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if alpha < 0:
        raise ParameterError(f"alpha must be >= 0, got {alpha}")
    return math.log(n) * math.log((1.0 + alpha) / (alpha + 1.0 / (n * (1.0 + alpha))))


def _map_trials(fn: Callable, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as ex:
        return list(ex.map(fn, tasks, chunksize=chunk))


# --- perfect-matching probability -----------------------------------------


@dataclass(frozen=True)
class PerfectProbEstimate:
    fraction: float
    ci_low: float
    ci_high: float
    successes: int
    trials: int


def _perfect_trial(task: tuple[MarketConfig, str, int, int]) -> bool:
    config, side_value, point_key, trial = task
    rng = stream(config.seed, _TAG_PERFECT, point_key, trial)
    result = run_da_lazy(config, Side(side_value), rng=rng, record_trace=False)
    return len(result.matching) >= config.n


def estimate_perfect_prob(
    config: MarketConfig,
    side: Side,
    trials: int,
    workers: int = 1,
    point_key: int = 0,
) -> PerfectProbEstimate:
    """P(all n jobs matched) under lazy DA, with a Wilson 95% interval.

    One DA run decides perfection of *all* stable matchings of the drawn
    instance, because the unmatched set is the same in every one of them.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    tasks = [(config, side.value, point_key, k) for k in range(trials)]
    outcomes = _map_trials(_perfect_trial, tasks, workers)
    successes = sum(outcomes)
    lo, hi = wilson_interval(successes, trials)
    return PerfectProbEstimate(successes / trials, lo, hi, successes, trials)


# --- threshold sweep -------------------------------------------------------


@dataclass(frozen=True)
class GridPoint:
    d: float
    trials: int
    perfect_fraction: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class SweepResult:
    n: int
    alpha: float
    side: Side
    seed: int
    grid: tuple[GridPoint, ...]
    predicted_d0: float
    empirical_d0: float | None  # None = crossing not found in range


def interpolate_crossing(ds: Sequence[float], fractions: Sequence[float]) -> float | None:
    """Linear interpolation of the first upward 0.5 crossing, or None."""
    for i in range(len(ds) - 1):
        f0, f1 = fractions[i], fractions[i + 1]
        if f0 == 0.5 and f1 >= 0.5:
            return float(ds[i])
        if f0 < 0.5 <= f1:
            return ds[i] + (0.5 - f0) * (ds[i + 1] - ds[i]) / (f1 - f0)
    if fractions and fractions[-1] == 0.5:
        return float(ds[-1])
    return None


def sweep_threshold(
    n: int,
    alpha: float,
    side: Side,
    d_grid: Sequence[float] | None = None,
    bisect: tuple[float, float] | None = None,
    trials: int = 400,
    base_seed: int = 0,
    workers: int = 1,
    rel_width: float = 0.05,
) -> SweepResult:
    """Estimate P(perfect) across degrees and locate the empirical threshold.

    Grid mode evaluates every d in ``d_grid``; bisection mode starts from
    the bracket ``bisect=(lo, hi)`` and refines the 0.5 crossing until the
    bracket's relative width is at most ``rel_width``. The empirical
    threshold is the linear interpolation of the 0.5 crossing; if the
    evaluated fractions never straddle 0.5 the sweep reports the grid with
    the threshold marked not-found.
    """
    if (d_grid is None) == (bisect is None):
        raise ParameterError("provide exactly one of d_grid or bisect")
    model = model_for_side(side)

    evaluated: dict[float, GridPoint] = {}
    next_key = 0

    def eval_point(d: float) -> GridPoint:
        nonlocal next_key
        if d in evaluated:
            return evaluated[d]
        config = MarketConfig(n=n, alpha=alpha, d=d, model=model, seed=base_seed)
        est = estimate_perfect_prob(config, side, trials, workers=workers, point_key=next_key)
        next_key += 1
        point = GridPoint(d, trials, est.fraction, est.ci_low, est.ci_high)
        evaluated[d] = point
        return point

    if d_grid is not None:
        if not d_grid:
            raise ParameterError("d_grid must be nonempty")
        for d in d_grid:
            eval_point(float(d))
    else:
        lo, hi = float(bisect[0]), float(bisect[1])
        if not (0 < lo < hi):
            raise ParameterError(f"bad bisection bracket ({lo}, {hi})")
        f_lo = eval_point(lo).perfect_fraction
        f_hi = eval_point(hi).perfect_fraction
        if f_lo < 0.5 <= f_hi:
            while (hi - lo) / ((hi + lo) / 2.0) > rel_width:
                mid = (lo + hi) / 2.0
                if eval_point(mid).perfect_fraction < 0.5:
                    lo = mid
                else:
                    hi = mid

    grid = tuple(sorted(evaluated.values(), key=lambda p: p.d))
    ds = [p.d for p in grid]
    fs = [p.perfect_fraction for p in grid]
    return SweepResult(
        n=n,
        alpha=alpha,
        side=side,
        seed=base_seed,
        grid=grid,
        predicted_d0=predicted_threshold(n, alpha),
        empirical_d0=interpolate_crossing(ds, fs),
    )


# --- rank profile ----------------------------------------------------------


@dataclass(frozen=True)
class RankProfile:
    """Per-trial mean ranks of matched candidates under CPDA.

    Because CPDA is candidate optimal, a matched candidate's partner rank
    is its best stable-partner rank, so ``mean_rank`` estimates the mean
    best stable rank. ``bound`` is the asymptotic lower-bound value
    d / ln((1+alpha) / (alpha + 1/m)); compare with explicit finite-n slack.
    """

    n: int
    alpha: float
    d: float
    trials: int
    mean_ranks: tuple[float, ...]
    bound: float
    unmatched_fraction: float

    @property
    def mean_rank(self) -> float:
        return sum(self.mean_ranks) / len(self.mean_ranks)


def _rank_trial(task: tuple[MarketConfig, int, int]) -> tuple[int, int, int]:
    config, point_key, trial = task
    rng = stream(config.seed, _TAG_RANK, point_key, trial)
    result = run_da_lazy(config, Side.CPDA, rng=rng, record_trace=False)
    matched = set(result.matching.values())
    rank_sum = sum(result.proposals_made[c] for c in matched)
    return rank_sum, len(matched), config.m - len(matched)


def measure_rank_profile(
    config: MarketConfig, trials: int, workers: int = 1, point_key: int = 0
) -> RankProfile:
    """Mean matched-candidate rank per CPDA trial, with the theoretical bound."""
    if config.model != Model.CANDIDATE_LISTS:
        raise ParameterError("rank profile measures candidates in CPDA (candidate-lists model)")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    tasks = [(config, point_key, k) for k in range(trials)]
    rows = _map_trials(_rank_trial, tasks, workers)
    means = tuple(rank_sum / matched for rank_sum, matched, _ in rows if matched)
    if not means:
        raise ParameterError("no trial matched any candidate; rank profile undefined")
    unmatched_total = sum(u for _, _, u in rows)
    m = config.m
    bound = config.d / math.log((1.0 + config.alpha) / (config.alpha + 1.0 / m))
    return RankProfile(
        n=config.n,
        alpha=config.alpha,
        d=config.d,
        trials=trials,
        mean_ranks=means,
        bound=bound,
        unmatched_fraction=unmatched_total / (m * trials),
    )


# --- report rows for the simpler subcommands --------------------------------


@dataclass(frozen=True)
class SimulateRow:
    n: int
    alpha: float
    d: float
    side: Side
    total_proposals: int
    matched: int
    perfect: bool


@dataclass(frozen=True)
class GameReport:
    params: GameParams
    policy_name: str
    closed_form: float
    upper_bound: float | None
    sim: GameSimResult


@dataclass(frozen=True)
class BinsRow:
    trial: int
    n: int
    throws: int
    occupied: int
    empty: int
    q_f: float


@dataclass(frozen=True)
class BinsReport:
    rows: tuple[BinsRow, ...]


# --- CSV writers ------------------------------------------------------------

SWEEP_HEADER = "n,alpha,side,d,trials,perfect_frac,ci_lo,ci_hi,predicted_d0,empirical_d0"
RANK_HEADER = "n,alpha,d,trials,mean_rank,bound,unmatched_frac"
SIMULATE_HEADER = "n,alpha,d,side,total_proposals,matched,perfect"
GAME_HEADER = "pg,pb,pn,streak,policy,trials,closed_form,upper_bound,win_frac,ci_lo,ci_hi"
BINS_HEADER = "trial,n,throws,occupied,empty,qF"

NOT_FOUND = "NA"


def write_csv(result, out: TextIO) -> None:
    """Serialize a result object to its CSV schema (9 significant digits)."""
    if isinstance(result, SweepResult):
        out.write(SWEEP_HEADER + "\n")
        d0 = NOT_FOUND if result.empirical_d0 is None else _fmt(result.empirical_d0)
        for p in result.grid:
            out.write(
                f"{result.n},{_fmt(result.alpha)},{result.side.value},{_fmt(p.d)},{p.trials},"
                f"{_fmt(p.perfect_fraction)},{_fmt(p.ci_low)},{_fmt(p.ci_high)},"
                f"{_fmt(result.predicted_d0)},{d0}\n"
            )
    elif isinstance(result, RankProfile):
        out.write(RANK_HEADER + "\n")
        out.write(
            f"{result.n},{_fmt(result.alpha)},{_fmt(result.d)},{result.trials},"
            f"{_fmt(result.mean_rank)},{_fmt(result.bound)},{_fmt(result.unmatched_fraction)}\n"
        )
    elif isinstance(result, GameReport):
        out.write(GAME_HEADER + "\n")
        p = result.params
        bound = NOT_FOUND if result.upper_bound is None else _fmt(result.upper_bound)
        s = result.sim
        out.write(
            f"{_fmt(p.p_good)},{_fmt(p.p_bad)},{_fmt(p.p_neutral)},{p.streak},"
            f"{result.policy_name},{s.trials},{_fmt(result.closed_form)},{bound},"
            f"{_fmt(s.win_fraction)},{_fmt(s.ci_low)},{_fmt(s.ci_high)}\n"
        )
    elif isinstance(result, BinsReport):
        out.write(BINS_HEADER + "\n")
        for r in result.rows:
            out.write(
                f"{r.trial},{r.n},{r.throws},{r.occupied},{r.empty},{_fmt(r.q_f)}\n"
            )
    elif isinstance(result, (list, tuple)) and all(isinstance(r, SimulateRow) for r in result):
        out.write(SIMULATE_HEADER + "\n")
        for r in result:
            out.write(
                f"{r.n},{_fmt(r.alpha)},{_fmt(r.d)},{r.side.value},"
                f"{r.total_proposals},{r.matched},{int(r.perfect)}\n"
            )
    else:
        raise ParameterError(f"no CSV schema for {type(result).__name__}")


def report_csv(result, path: str) -> str:
    """Write ``result`` to ``path``; bytes depend only on the result."""
    try:
        with open(path, "w", newline="") as fh:
            write_csv(result, fh)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path
