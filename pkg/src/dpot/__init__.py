"""dpot: consensus-based transport-plan solver with a differentially
private variant, exact centralized oracles, and privacy audits."""

from .engine import (
    RunResult,
    RunTrace,
    SolveOptions,
    TransportState,
    eval_lagrangian,
    run,
    social_utility,
    step_long,
    step_short,
)
from .local_solver import (
    LocalProblem,
    LocalSolution,
    project_box_sum,
    solve_source_subproblem,
    solve_target_subproblem,
)
from .network import (
    EdgeId,
    InfeasibleNetworkError,
    Network,
    NetworkError,
    NodeId,
    build_network,
    check_feasibility,
    complete_edges,
    source_node,
    target_node,
)
from .privacy import (
    DpRunResult,
    NoiseDraw,
    PrivacyConfig,
    density_ratio_check_1d,
    dp_run,
    make_neighbor,
    node_dataset,
    perturb,
    sample_noise,
    sensitivity_audit,
    xi_from_beta,
)
from .reference import OracleSolution, solve_bruteforce_grid, solve_centralized_linear
from .utility import (
    UtilitySpec,
    UtilityTable,
    check_slope_bound,
    eval_utility,
    grad_utility,
    linear_table,
)

__version__ = "0.1.0"
