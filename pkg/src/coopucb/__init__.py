"""Cooperative UCB for multi-agent bandits over a communication graph."""

from .agents import (
    CentralizedTracker,
    EstimateUnavailable,
    NetworkState,
    PolicyParams,
    consensus_step,
    mu_hat,
    select_arm,
    single_agent_ucb_select,
    ucb_bonus,
)
from .bandit import (
    TABLE1_MEANS,
    TABLE1_SIGMA,
    BanditModel,
    RegretTrace,
    expected_group_regret,
    fusion_center_lower_bound,
    sample_reward,
    table1_model,
)
from .graph import (
    ConsensusMatrix,
    Graph,
    GraphError,
    build_consensus_matrix,
    build_graph,
    erdos_renyi,
    fig2_graph,
    laplacian,
    read_edge_list,
)
from .sim import (
    EnsembleResult,
    ExperimentConfig,
    run_ensemble,
    run_once,
    theorem1_bound,
    verify_proposition1,
    verify_theorem1,
)
from .spectral import (
    SpectralMetrics,
    a_pj,
    epsilon_c,
    epsilon_n,
    geometric_series_oracle,
    pair_terms,
    spectral_metrics,
)

__version__ = "0.1.0"
