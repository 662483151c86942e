"""Bernoulli bandits with cluster-constrained arms.

Index policies (KL-UCB, the cluster-coupled Clus-UCB, two-level baselines),
asymptotic regret-bound constants with an exact LP cross-check, and a seeded
Monte Carlo regret engine with CSV/SVG reporting.
"""

from .bounds import (
    ALLARMS,
    MINARM,
    BoundReport,
    ClusterBoundTerms,
    DegenerateDivergence,
    EnumerationLimit,
    classical_bound,
    clus_lower_bound,
    clus_upper_constant,
    lp_oracle,
    suboptimal_cluster_terms,
)
from .instance import (
    ArmId,
    Cluster,
    ClusteredInstance,
    ConstraintViolation,
    NonUniqueOptimum,
    ValidationReport,
    load_instance,
    validate,
)
from .kl import (
    clus_ucb_index,
    exploration_budget,
    kl_bernoulli,
    kl_plus,
    kl_ucb_index,
)
from .policies import KLUCB, ClusUCB, Policy, PolicySpec, TwoLevelPolicy
from .sim import (
    HorizonTooShort,
    MonteCarloSummary,
    PullDiagnostics,
    RegretTrace,
    episode_seed,
    expected_pull_check,
    geometric_grid,
    run_batch,
    run_episode,
    splitmix64,
)

__version__ = "0.1.0"

__all__ = [
    "ALLARMS",
    "MINARM",
    "ArmId",
    "BoundReport",
    "Cluster",
    "ClusterBoundTerms",
    "ClusteredInstance",
    "ClusUCB",
    "ConstraintViolation",
    "DegenerateDivergence",
    "EnumerationLimit",
    "HorizonTooShort",
    "KLUCB",
    "MonteCarloSummary",
    "NonUniqueOptimum",
    "Policy",
    "PolicySpec",
    "PullDiagnostics",
    "RegretTrace",
    "TwoLevelPolicy",
    "ValidationReport",
    "classical_bound",
    "clus_lower_bound",
    "clus_ucb_index",
    "clus_upper_constant",
    "episode_seed",
    "expected_pull_check",
    "exploration_budget",
    "geometric_grid",
    "kl_bernoulli",
    "kl_plus",
    "kl_ucb_index",
    "load_instance",
    "lp_oracle",
    "run_batch",
    "run_episode",
    "splitmix64",
    "suboptimal_cluster_terms",
    "validate",
]
