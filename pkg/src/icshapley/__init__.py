"""Shapley-value influence attribution for seed sets under the independent
cascade model: an exact polynomial-time algorithm for single-step
termination, a brute-force oracle, and three sampling estimators for
multi-step and complete termination."""

from .approx import (
    BudgetCeilingError,
    EstimatorAccumulator,
    RRSample,
    SampleBudget,
    approx_live_edge,
    approx_permute_mc,
    approx_rr_set,
    estimate_threshold,
    live_edge_sample_size,
    permute_mc_sample_sizes,
    rr_theta,
    sample_rr_set,
)
from .bench import (
    ErrorSummary,
    SeedStrategy,
    average_relative_error,
    load_seed_file,
    make_ground_truth,
    pagerank,
    select_seeds,
)
from .diffusion import (
    CascadeResult,
    estimate_value,
    exact_value_single_step,
    multi_source_reach,
    simulate_cascade,
)
from .exact import (
    GuardExceededError,
    ShapleyReport,
    exact_single_step,
    factorial_coefficients,
    failure_subset_sums,
    live_edge_value_tables,
    mean_failure_products,
    shapley_bruteforce,
)
from .graph import (
    DirectedGraph,
    GraphError,
    LiveEdgeGraph,
    SeedSet,
    TerminationPolicy,
    assign_uniform,
    assign_weighted_cascade,
    coalition_subgraph,
    generate_erdos_renyi,
    graph_from_edges,
    load_edge_list,
    remove_seed_in_edges,
    sample_live_edge,
    save_edge_list,
)
from .rng import spawn_rng

__version__ = "0.1.0"

__all__ = [
    "BudgetCeilingError",
    "CascadeResult",
    "DirectedGraph",
    "ErrorSummary",
    "EstimatorAccumulator",
    "GraphError",
    "GuardExceededError",
    "LiveEdgeGraph",
    "RRSample",
    "SampleBudget",
    "SeedSet",
    "SeedStrategy",
    "ShapleyReport",
    "TerminationPolicy",
    "approx_live_edge",
    "approx_permute_mc",
    "approx_rr_set",
    "assign_uniform",
    "assign_weighted_cascade",
    "average_relative_error",
    "coalition_subgraph",
    "estimate_threshold",
    "estimate_value",
    "exact_single_step",
    "exact_value_single_step",
    "factorial_coefficients",
    "failure_subset_sums",
    "generate_erdos_renyi",
    "graph_from_edges",
    "live_edge_sample_size",
    "live_edge_value_tables",
    "load_edge_list",
    "load_seed_file",
    "make_ground_truth",
    "mean_failure_products",
    "multi_source_reach",
    "pagerank",
    "permute_mc_sample_sizes",
    "remove_seed_in_edges",
    "rr_theta",
    "sample_live_edge",
    "sample_rr_set",
    "save_edge_list",
    "select_seeds",
    "shapley_bruteforce",
    "simulate_cascade",
    "spawn_rng",
]
