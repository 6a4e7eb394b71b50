"""Auction-based cache placement and evaluation for D2D-enabled cellular networks."""

__version__ = "0.1.0"

from .scenario import (
    AuctionParams,
    ContentParams,
    MobilityParams,
    RadioParams,
    Scenario,
    ScenarioError,
    default_scenario,
    load_scenario,
    rng_stream,
    save_scenario,
    with_overrides,
)
from .mobility import (
    ConflictGraph,
    EncounterMatrix,
    ExpandedConflict,
    HomePointAssignment,
    Trace,
    conflict_matrix,
    encounter_matrix,
    expand_conflict,
    generate_homepoints,
    mean_in_cluster_encounter,
    sample_position,
    simulate_trace,
    wrap_distance,
)
from .radio import (
    RateSummary,
    RateTable,
    pathloss_bs_db,
    pathloss_d2d_db,
    rate_cellular,
    rate_d2d,
    rate_summary_matrix,
    rate_summary_pair,
)
from .valuation import (
    PreferenceMatrix,
    ValueVector,
    build_value_vector,
    generate_preferences,
    local_popularity,
    revenue,
    sharing_profit,
    zipf_popularity,
)
from .mwis import (
    SdpConvergenceError,
    SdpSolution,
    Selection,
    WisInstance,
    round_solution,
    solve_exact,
    solve_sdp,
)
from .pricing import nbs_prices, second_price_total, sublease_guard
from .auction import AuctionOutcome, Placement, export_outcome, moac, mrac
from .metrics import MetricsReport, access_delay, evaluate, offloading_ratio, social_welfare
from .experiments import (
    ExperimentPlan,
    World,
    baseline_greedy_pop,
    baseline_random,
    build_world,
    run_experiment,
)
