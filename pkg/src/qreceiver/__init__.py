"""Layered coherent-state receivers: physics model, planners, learning agents and bandits."""
from .agents import Agent, PolicySpec, QTable, greedy_action_tree
from .bandit import BanditProblem, make_problem_from_displacements, run_bandit, run_bandit_ensemble
from .env import (
    LayerAction,
    NoiseConfig,
    ReceiverConfig,
    default_beta_grid,
    fixed_attenuations,
    helstrom_bound,
    homodyne_limit,
    prob_no_click,
    run_episode,
)
from .errors import CapacityError, ContractViolation, DegenerateEvidence, ScheduleError
from .harness import ExperimentConfig, run_ensemble, sweep
from .planner import (
    ActionTree,
    BeliefGrid,
    dp_optimal_value,
    dp_policy_extract,
    exact_success_probability,
    exhaustive_optimal,
)

__version__ = "0.1.0"
