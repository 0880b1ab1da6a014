"""Single-layer receivers as Bernoulli bandits, with regret analytics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from .agents import PolicySpec
from .env import NoiseConfig
from .planner import single_layer_ml_success

BETA_STAR = -0.74


def problem_1_displacements(alpha: float = 0.4) -> tuple[float, ...]:
    return (0.0, -alpha, BETA_STAR)


def problem_2_displacements(alpha: float = 0.4) -> tuple[float, ...]:
    return (-alpha, BETA_STAR, -1.5 * alpha)


@dataclass(frozen=True)
class BanditProblem:
    arms: tuple[float, ...]
    labels: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(float(a) for a in self.arms))
        if not self.arms:
            raise ValueError("a bandit needs at least one arm")
        if any(not 0.0 <= a <= 1.0 for a in self.arms):
            raise ValueError("arm success probabilities must lie in [0, 1]")

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self.arms)

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.values))

    @property
    def gaps(self) -> np.ndarray:
        return self.values.max() - self.values


def make_problem_from_displacements(
    alpha: float, betas: Sequence[float], noise: NoiseConfig = NoiseConfig()
) -> BanditProblem:
    if len(betas) == 0:
        raise ValueError("need at least one displacement")
    return BanditProblem(tuple(single_layer_ml_success(alpha, b, noise) for b in betas), tuple(betas))


@dataclass
class RegretCurve:
    chosen: np.ndarray
    rewards: np.ndarray
    recommended: np.ndarray
    cumulative_regret: np.ndarray
    simple_regret: np.ndarray


def cumulative_regret(chosen: np.ndarray, problem: BanditProblem) -> np.ndarray:
    return np.cumsum(problem.gaps[np.asarray(chosen, dtype=np.int64)])


def simple_regret(recommended: np.ndarray, problem: BanditProblem) -> np.ndarray:
    return problem.gaps[np.asarray(recommended, dtype=np.int64)]


def run_bandit(rng: np.random.Generator, problem: BanditProblem, strategy: PolicySpec, T: int) -> RegretCurve:
    chosen = np.zeros(T, dtype=np.int64)
    rewards = np.zeros(T, dtype=np.int64)
    recommended = np.zeros(T, dtype=np.int64)
    if T > 0:
        K.bandit_run(rng, *strategy.kernel_args(), problem.values, T, chosen, rewards, recommended)
    return RegretCurve(
        chosen, rewards, recommended, cumulative_regret(chosen, problem), simple_regret(recommended, problem)
    )


def bernoulli_kl(p: float, q: float) -> float:
    if not (0.0 < q < 1.0):
        raise ValueError(f"KL divergence to Bernoulli({q}) diverges")
    terms = 0.0
    if p > 0:
        terms += p * math.log(p / q)
    if p < 1:
        terms += (1 - p) * math.log((1 - p) / (1 - q))
    return terms


def lai_robbins_constant(problem: BanditProblem) -> float:
    """Sum over sub-optimal arms of gap / KL(arm || best arm)."""
    q = problem.values
    if np.any(q <= 0.0) or np.any(q >= 1.0):
        raise ValueError("Lai-Robbins constant needs every arm strictly inside (0, 1); the KL divergence diverges")
    best = q[problem.best_arm]
    return float(sum((best - qa) / bernoulli_kl(qa, best) for qa in q if qa < best))


def ucb1_regret_upper_bound(problem: BanditProblem, t: float) -> float:
    """Finite-time UCB-1 regret bound; zero-gap arms are skipped."""
    if t < 1:
        raise ValueError("t must be >= 1")
    gaps = problem.gaps
    gaps = gaps[gaps > 0]
    return float(8.0 * math.log(t) * np.sum(1.0 / gaps) + len(problem.arms) * math.pi**2 / 3.0)


@dataclass
class BanditEnsemble:
    strategy: PolicySpec
    cumulative: np.ndarray  # (n_agents, T)
    simple: np.ndarray

    @property
    def mean_cumulative(self) -> np.ndarray:
        return self.cumulative.mean(axis=0)

    @property
    def std_cumulative(self) -> np.ndarray:
        return self.cumulative.std(axis=0)

    @property
    def mean_simple(self) -> np.ndarray:
        return self.simple.mean(axis=0)


def run_bandit_ensemble(
    problem: BanditProblem, strategy: PolicySpec, T: int, n_agents: int = 1000, base_seed: int = 0
) -> BanditEnsemble:
    cum = np.zeros((n_agents, T))
    simple = np.zeros((n_agents, T))
    for i in range(n_agents):
        curve = run_bandit(np.random.default_rng(base_seed + i), problem, strategy, T)
        cum[i], simple[i] = curve.cumulative_regret, curve.simple_regret
    return BanditEnsemble(strategy, cum, simple)


BANDIT_COLUMNS = (
    "t", "mean_cumulative_regret", "std", "mean_simple_regret", "lai_robbins_reference", "ucb1_bound",
)


def regret_rows(ensemble: BanditEnsemble, problem: BanditProblem, checkpoints: Sequence[int]) -> list[tuple]:
    c_lr = lai_robbins_constant(problem) if len(problem.arms) > 1 else 0.0
    rows = []
    for t in checkpoints:
        i = t - 1
        rows.append((
            int(t),
            float(ensemble.mean_cumulative[i]),
            float(ensemble.std_cumulative[i]),
            float(ensemble.mean_simple[i]),
            c_lr * math.log(t),
            ucb1_regret_upper_bound(problem, t),
        ))
    return rows
