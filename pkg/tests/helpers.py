"""Shared test utilities: random small markets and independent oracles.

Everything here is deliberately independent of the production code paths
it is used to check: the game oracle solves the run-length chain by
backward substitution, the balls-in-bins moments come from the exact
occupancy formulas, and market generation only uses the public samplers.
"""

from __future__ import annotations

import math

from matchlab import MarketConfig, MarketInstance, Model, sample_market
from matchlab.rng import stream


def random_small_config(rng, max_side: int = 6) -> MarketConfig:
    """A mixed-(alpha, d, model) config with both sides at most max_side."""
    n = int(rng.integers(1, max_side + 1))
    m = int(rng.integers(n, max_side + 1))
    alpha = (m - n) / n
    model = [Model.SYMMETRIC, Model.CANDIDATE_LISTS, Model.JOB_LISTS][int(rng.integers(0, 3))]
    d_cap = m if model == Model.JOB_LISTS else n
    d = float(rng.integers(1, d_cap + 1))
    return MarketConfig(n=n, alpha=alpha, d=d, model=model, seed=0)


def random_small_market(seed: int, trial: int, max_side: int = 6) -> MarketInstance:
    rng = stream(seed, trial)
    config = random_small_config(rng, max_side)
    return sample_market(config, rng=stream(seed, trial, 1))


def candidate_rank_table(instance: MarketInstance) -> list[dict[int, int]]:
    return [{j: i + 1 for i, j in enumerate(lst)} for lst in instance.candidate_lists]


def job_rank_table(instance: MarketInstance) -> list[dict[int, int]]:
    return [{c: i + 1 for i, c in enumerate(lst)} for lst in instance.job_lists]


# --- probability-game oracle -------------------------------------------------


def game_win_prob_by_substitution(p_good: float, p_bad: float, p_neutral: float, streak: int) -> float:
    """Tight-game win probability by backward substitution on the run-length chain.

    State r = current consecutive-Bad count; Good wins only at r = 0 and
    ends the game unwon at r >= 1, so

        W(0) = p_g + p_n W(0) + p_b W(1)
        W(r) =       p_n W(0) + p_b W(r+1)   for 1 <= r < streak,  W(streak) = 0.

    Writing W(r) = a_r + c_r * W(0) and substituting from r = streak down
    avoids any geometric-series algebra.
    """
    a, c = 0.0, 0.0  # values at r = streak
    for _ in range(streak - 1):  # down to r = 1
        a = p_bad * a
        c = p_neutral + p_bad * c
    denom = 1.0 - p_neutral - p_bad * c
    if denom <= 0.0:
        # Neutral absorbs everything; the game never resolves.
        return 0.0
    return (p_good + p_bad * a) / denom


def game_win_prob_within_horizon(
    p_good: float, p_bad: float, p_neutral: float, streak: int, horizon: int
) -> float:
    """P(win within `horizon` rounds), exact finite-horizon dynamic program."""
    w = [0.0] * (streak + 1)  # w[r] with 0 rounds left
    for _ in range(horizon):
        nxt = [0.0] * (streak + 1)
        nxt[0] = p_good + p_neutral * w[0] + p_bad * w[1]
        for r in range(1, streak):
            nxt[r] = p_neutral * w[0] + p_bad * w[r + 1]
        w = nxt
    return w[0]


# --- balls-in-bins exact moments ---------------------------------------------


def empty_bins_mean(bins: int, throws: int) -> float:
    return bins * (1.0 - 1.0 / bins) ** throws


def empty_bins_var(bins: int, throws: int) -> float:
    n, t = bins, throws
    q1 = (1.0 - 1.0 / n) ** t
    q2 = (1.0 - 2.0 / n) ** t if n >= 2 else 0.0
    ex = n * q1
    ex2 = n * q1 + n * (n - 1) * q2
    return ex2 - ex * ex


def coupon_collector_mean(bins: int) -> float:
    return bins * sum(1.0 / i for i in range(1, bins + 1))


def coupon_collector_var(bins: int) -> float:
    # Sum of independent geometric stage variances, success prob (n-k)/n.
    n = bins
    var = 0.0
    for k in range(n):
        p = (n - k) / n
        var += (1.0 - p) / (p * p)
    return var


def harmonic(n: int) -> float:
    return sum(1.0 / i for i in range(1, n + 1))


def binomial_mean_3sigma(n_draws: int, p: float, samples: int) -> float:
    """3-sigma band half-width for the mean of `samples` Binomial(n_draws, p) draws."""
    return 3.0 * math.sqrt(n_draws * p * (1.0 - p) / samples)
