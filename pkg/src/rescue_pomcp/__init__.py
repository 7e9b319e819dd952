"""Grid-world POMDP simulator and POMCP planner for drone-responder search."""

from .belief import (
    BayesFilter,
    Belief,
    InconsistentObservation,
    belief_to_csv,
    entropy,
    truncate,
)
from .grid import (
    Action,
    CostTable,
    GridMap,
    Position,
    UNREACHABLE,
    compute_costs,
    load_map_file,
    make_environment,
    parse_map,
)
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    TrialResult,
    expand_grid,
    load_config,
    run_experiment,
    run_trial,
    sweep,
    write_results_csv,
)
from .model import ModelParams, Observation, SearchModel, State, chebyshev
from .planner import (
    Planner,
    PlannerConfig,
    SearchNode,
    select_rollout_action,
    select_rollout_target,
    ucb_select,
)

__all__ = [
    "Action",
    "BayesFilter",
    "Belief",
    "CostTable",
    "ExperimentConfig",
    "ExperimentResult",
    "GridMap",
    "InconsistentObservation",
    "ModelParams",
    "Observation",
    "Planner",
    "PlannerConfig",
    "Position",
    "SearchModel",
    "SearchNode",
    "State",
    "TrialResult",
    "UNREACHABLE",
    "belief_to_csv",
    "chebyshev",
    "compute_costs",
    "entropy",
    "expand_grid",
    "load_config",
    "load_map_file",
    "make_environment",
    "parse_map",
    "run_experiment",
    "run_trial",
    "select_rollout_action",
    "select_rollout_target",
    "sweep",
    "truncate",
    "ucb_select",
    "write_results_csv",
]
