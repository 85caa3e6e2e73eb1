"""matchlab: a stable-matching market laboratory.

Markets with correlated cardinal utilities (public ratings plus private
scores), deferred acceptance in all its variants, edge-set protocols, and a
Monte Carlo experiment harness.
"""

from .market import (
    LEFT,
    MODEL_REGISTRY,
    RIGHT,
    Market,
    UtilityModel,
    aligned_rank,
    custom_model,
    generate_market,
    linear_model,
    load_market,
    monotonicity_audit,
    other_side,
    rank_order,
    register_model,
    save_market,
)
from .engine import (
    CutSpec,
    EdgeSet,
    Matching,
    brute_force_stable_set,
    extreme_matchings,
    max_bipartite_matching,
    multi_stable_agents,
    run_da,
    run_double_cut_da,
    verify_stability,
)
from .analysis import (
    InterviewParams,
    LossParams,
    LossReport,
    SelectedSetParams,
    acceptable_edges,
    achieved_utilities,
    benchmark,
    benchmark_vector,
    cone_bounds,
    interview_edges,
    loss_params_from_bound,
    loss_report,
    loss_threshold_edges,
    lower_bound_loss_level,
    selected_edges,
    selected_survival,
    selected_weight,
    theoretical_loss_params,
    truncated_edges,
    viable_edges,
)
from .experiments import ExperimentConfig, ExperimentReport, run_experiment

__version__ = "0.1.0"
