"""The good/bad/neutral multi-round game: closed form, simulation, coupling.

Each round one of three events happens: Good, Bad, or Neutral. The game is
lost when Bad occurs ``streak`` times in a row. A Good round wins the game
*only from a clean slate*: once a bad run has started, only Neutral breaks
it, and a Good arrival mid-run ends the game unsuccessfully. (That rule is
what makes the closed form below exact; under the laxer rule where Good
wins mid-run too, the value would be strictly larger.)

In the *tight* game the Bad probability is exactly ``p_bad`` every round;
an adversary may instead push it anywhere up to ``1 - p_good``, round by
round, as a function of history. The tight game's winning probability has
the closed form

    p_good * (1 - p_bad) / (p_good + p_neutral * p_bad**streak)

and dominates every adversary, which never wins more often than the tight
game (checked here by an explicit monotone coupling on shared uniforms).

Degenerate corners are pinned down explicitly: p_good = 0 never wins (0);
p_bad = 0 with p_good > 0 always wins eventually (1); p_bad = 1 forces
p_good = 0 in a tight game, so the result is 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BoundUndefinedError, ParameterError, PolicyContractError
from .rng import stream

_TIGHT_TOL = 1e-12
_Z95 = 1.959963984540054  # two-sided 95% normal quantile

DEFAULT_ROUND_CAP = 10_000_000


@dataclass(frozen=True)
class GameParams:
    """Round probabilities and the losing streak length.

    ``p_bad`` is the adversary's floor: every round's Bad probability is
    at least this. Mass not assigned to good/bad/neutral is additional Bad
    probability available to the adversary (a tight game has none).
    """

    p_good: float
    p_bad: float
    p_neutral: float
    streak: int

    def __post_init__(self) -> None:
        for name, p in (("p_good", self.p_good), ("p_bad", self.p_bad), ("p_neutral", self.p_neutral)):
            if not (0.0 <= p <= 1.0):
                raise ParameterError(f"{name} must be in [0, 1], got {p}")
        if self.p_good + self.p_bad + self.p_neutral > 1.0 + _TIGHT_TOL:
            raise ParameterError("p_good + p_bad + p_neutral exceeds 1")
        if self.streak < 1:
            raise ParameterError(f"streak must be >= 1, got {self.streak}")

    @property
    def is_tight(self) -> bool:
        return abs(self.p_good + self.p_bad + self.p_neutral - 1.0) <= _TIGHT_TOL


def win_prob_closed_form(params: GameParams) -> float:
    """Exact winning probability of the tight game.

    Requires a tight parameterization (the three probabilities sum to 1);
    anything else is the adversarial game, which only has bounds.
    """
    if not params.is_tight:
        raise ParameterError("closed form applies to the tight game (probabilities must sum to 1)")
    if params.p_good == 0.0:
        return 0.0
    if params.p_bad == 0.0:
        return 1.0
    return (
        params.p_good
        * (1.0 - params.p_bad)
        / (params.p_good + params.p_neutral * params.p_bad**params.streak)
    )


def win_prob_upper_bound(params: GameParams) -> float:
    """The p_good / p_bad**streak bound, valid for any adversary."""
    if params.p_bad == 0.0:
        raise BoundUndefinedError("upper bound p_good / p_bad**streak undefined at p_bad = 0")
    return params.p_good / params.p_bad**params.streak


# An adversary policy maps (round number, per-trial current bad-run length)
# to that round's Bad probability, within [p_bad, 1 - p_good]. Round-only
# policies may return a scalar; history-aware ones return an array aligned
# with run_lengths.
PolicyFn = Callable[[GameParams, int, np.ndarray], "float | np.ndarray"]


@dataclass(frozen=True)
class AdversaryPolicy:
    name: str
    bad_prob: PolicyFn


def tight_policy() -> AdversaryPolicy:
    return AdversaryPolicy("tight", lambda p, i, runs: p.p_bad)


def maximal_policy() -> AdversaryPolicy:
    return AdversaryPolicy("maximal", lambda p, i, runs: 1.0 - p.p_good)


def alternating_policy() -> AdversaryPolicy:
    """Tight on odd rounds, maximal on even rounds."""
    return AdversaryPolicy(
        "alternating", lambda p, i, runs: p.p_bad if i % 2 == 1 else 1.0 - p.p_good
    )


POLICIES: dict[str, Callable[[], AdversaryPolicy]] = {
    "tight": tight_policy,
    "maximal": maximal_policy,
    "alternating": alternating_policy,
}


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial fraction; well-behaved near 0 and 1."""
    if trials <= 0:
        raise ParameterError("trials must be >= 1")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class GameSimResult:
    trials: int
    wins: int
    losses: int
    timeouts: int
    win_fraction: float
    ci_low: float
    ci_high: float


def _checked_bad_probs(
    params: GameParams, policy: AdversaryPolicy, round_no: int, runs: np.ndarray
) -> np.ndarray:
    pb = np.asarray(policy.bad_prob(params, round_no, runs), dtype=np.float64)
    if pb.ndim == 0:
        pb = np.full(runs.shape, float(pb))
    if np.any(pb < params.p_bad - _TIGHT_TOL):
        raise PolicyContractError(
            f"policy {policy.name!r} emitted p_bad below the floor {params.p_bad} in round {round_no}"
        )
    if np.any(pb > 1.0 - params.p_good + _TIGHT_TOL):
        raise PolicyContractError(
            f"policy {policy.name!r} emitted p_bad above 1 - p_good in round {round_no}"
        )
    return np.clip(pb, params.p_bad, 1.0 - params.p_good)


def simulate_game(
    params: GameParams,
    policy: AdversaryPolicy,
    trials: int,
    seed: int = 0,
    round_cap: int = DEFAULT_ROUND_CAP,
) -> GameSimResult:
    """Monte Carlo the adversarial game; returns the win fraction with 95% CI.

    All trials advance in lockstep, one vectorized round at a time; each
    trial stops at its own win/loss. Trials still alive after ``round_cap``
    rounds are counted as timeouts (and as non-wins in the fraction).
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = stream(seed)
    runs = np.zeros(trials, dtype=np.int64)  # current consecutive-Bad count
    alive = np.arange(trials)
    wins = 0
    losses = 0
    round_no = 0
    while alive.size and round_no < round_cap:
        round_no += 1
        pb = _checked_bad_probs(params, policy, round_no, runs)
        u = rng.random(alive.size)
        good = u < params.p_good
        bad = u >= 1.0 - pb
        won = good & (runs == 0)
        runs = np.where(bad, runs + 1, np.where(good, runs, 0))
        lost = (runs >= params.streak) | (good & ~won)  # mid-run Good ends the game unwon
        wins += int(np.count_nonzero(won))
        losses += int(np.count_nonzero(lost))
        keep = ~(won | lost)
        alive = alive[keep]
        runs = runs[keep]
    timeouts = int(alive.size)
    lo, hi = wilson_interval(wins, trials)
    return GameSimResult(trials, wins, losses, timeouts, wins / trials, lo, hi)


@dataclass(frozen=True)
class DominanceReport:
    """Joint outcomes of the tight and adversarial games on shared randomness.

    The coupling demotes some of the tight game's Neutral rounds to Bad in
    the adversarial copy (a single shared uniform per round does it:
    Good iff u < p_good, Bad iff u >= 1 - p_bad_i, and p_bad_i >= p_bad).
    A tight loss therefore forces an adversarial loss, so
    ``adversary_win_tight_loss`` must be zero.
    """

    trials: int
    tight_wins: int
    adversary_wins: int
    adversary_win_tight_loss: int
    adversary_loss_tight_win: int
    identical_outcomes: int
    timeouts: int

    @property
    def adversary_loss_tight_win_fraction(self) -> float:
        return self.adversary_loss_tight_win / self.trials


def coupled_dominance_check(
    params: GameParams,
    policy: AdversaryPolicy,
    trials: int,
    seed: int = 0,
    round_cap: int = DEFAULT_ROUND_CAP,
) -> DominanceReport:
    """Run tight and adversarial games on one uniform stream per trial."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if not params.is_tight:
        raise ParameterError("the coupling compares against the tight game; probabilities must sum to 1")
    rng = stream(seed)

    # outcome codes: 0 = still playing, 1 = win, 2 = loss
    tight_out = np.zeros(trials, dtype=np.int8)
    adv_out = np.zeros(trials, dtype=np.int8)
    tight_runs = np.zeros(trials, dtype=np.int64)
    adv_runs = np.zeros(trials, dtype=np.int64)
    alive = np.arange(trials)
    round_no = 0
    while alive.size and round_no < round_cap:
        round_no += 1
        u = rng.random(alive.size)
        pb = _checked_bad_probs(params, policy, round_no, adv_runs[alive])

        t_open = tight_out[alive] == 0
        a_open = adv_out[alive] == 0
        good = u < params.p_good
        t_bad = u >= 1.0 - params.p_bad
        a_bad = u >= 1.0 - pb

        tr = tight_runs[alive]
        tight_out[alive[t_open & good & (tr == 0)]] = 1
        tight_out[alive[t_open & good & (tr > 0)]] = 2
        tr = np.where(t_open & ~good, np.where(t_bad, tr + 1, 0), tr)
        tight_runs[alive] = tr
        tight_out[alive[t_open & ~good & (tr >= params.streak)]] = 2

        ar = adv_runs[alive]
        adv_out[alive[a_open & good & (ar == 0)]] = 1
        adv_out[alive[a_open & good & (ar > 0)]] = 2
        ar = np.where(a_open & ~good, np.where(a_bad, ar + 1, 0), ar)
        adv_runs[alive] = ar
        adv_out[alive[a_open & ~good & (ar >= params.streak)]] = 2

        alive = alive[(tight_out[alive] == 0) | (adv_out[alive] == 0)]

    timeouts = int(np.count_nonzero((tight_out == 0) | (adv_out == 0)))
    return DominanceReport(
        trials=trials,
        tight_wins=int(np.count_nonzero(tight_out == 1)),
        adversary_wins=int(np.count_nonzero(adv_out == 1)),
        adversary_win_tight_loss=int(np.count_nonzero((adv_out == 1) & (tight_out == 2))),
        adversary_loss_tight_win=int(np.count_nonzero((adv_out == 2) & (tight_out == 1))),
        identical_outcomes=int(np.count_nonzero((adv_out == tight_out) & (adv_out != 0))),
        timeouts=timeouts,
    )
