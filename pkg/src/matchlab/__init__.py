"""matchlab: a simulation laboratory for random two-sided matching markets.

Deferred acceptance over three random preference models (symmetric
edge-probability, candidate lists, job lists), a stability oracle with
desk-scale enumeration, the good/bad/neutral streak game, balls-in-bins
couplings, and a Monte Carlo experiment suite for threshold and rank
measurements.
"""

from .bins import (
    AllOccupied,
    BinOccupancy,
    CoupledTrace,
    FixedThrows,
    OccupiedReaches,
    acceptance_prob_estimate,
    run_balls_in_bins,
    run_coupled_da_bins,
    unmatched_estimate,
    unmatched_receiver_counts,
)
from .engine import (
    ChainTermination,
    DAResult,
    Outcome,
    ProposalEvent,
    RejectionChain,
    Side,
    continue_rejecting,
    extract_rejection_chains,
    run_da,
    run_da_lazy,
)
from .errors import (
    BoundUndefinedError,
    InternalInvariantError,
    MatchlabError,
    ParameterError,
    PolicyContractError,
    ScaleError,
    StructuralError,
)
from .game import (
    AdversaryPolicy,
    DominanceReport,
    GameParams,
    GameSimResult,
    POLICIES,
    alternating_policy,
    coupled_dominance_check,
    maximal_policy,
    simulate_game,
    tight_policy,
    wilson_interval,
    win_prob_closed_form,
    win_prob_upper_bound,
)
from .models import (
    MarketConfig,
    MarketInstance,
    Model,
    Representation,
    SandwichTriple,
    SideSet,
    check_containment,
    dump_instance,
    load_instance,
    sample_market,
    sample_sandwich_triple,
)
from .oracle import (
    BlockingPair,
    BlockingReason,
    Matching,
    best_stable_rank,
    cpda_candidate_ranks,
    enumerate_stable_matchings,
    find_blocking_pairs,
    is_perfect,
)
from .experiments import (
    PerfectProbEstimate,
    RankProfile,
    SweepResult,
    estimate_perfect_prob,
    measure_rank_profile,
    predicted_threshold,
    report_csv,
    sweep_threshold,
)
from .rng import stream

__version__ = "0.1.0"
