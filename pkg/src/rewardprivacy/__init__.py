"""Reward-function privacy for tabular MDPs.

Private planners (MEIR, Max Misinformation and its variants), anti-reward
generators, IRL observers and reward-quality metrics.
"""
from .errors import (ConfigError, DegenerateSupport, DegenerateVariance, DimensionMismatch, EmptyDemonstrations,
                     InfeasibleThreshold, LambdaCapTooSmall, ParseError, RewardPrivacyError, ValidationError)
from .mdp import (MixedPolicy, TabularMdp, Trajectory, causal_entropy, empirical_occupancy, expected_return,
                  flow_residual, mix_policies, occupancy_of_policy, policy_of_occupancy, sample_trajectories,
                  solve_optimal, solve_soft, validate_mdp)
from .envs import build_env
from .planners import (PlannerResult, RewardConstraint, meir, mm_binary_search, mm_mix, mm_primal_dual, mmbe,
                       reference_returns)
from .antireward import AntiRewardConfig, DivergenceKind, f_div_closed_form, gen_anti_reward, traj_kl_anti_reward, \
    wasserstein1_critic
from .observers import IrlConfig, RecoveredReward, cluster_occupancy, irl_clustered, irl_from_demos, mce_irl
from .metrics import MetricsReport, epic, ordering_consistency, pearson, rollout_eval

__version__ = "0.1.0"
