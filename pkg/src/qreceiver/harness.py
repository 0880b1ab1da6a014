"""Training ensembles of seeded agents and sweeping experimental parameters."""
from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .agents import Agent, PolicySpec, QTable
from .env import NoiseConfig, ReceiverConfig, helstrom_bound, homodyne_limit, run_episode
from .planner import exact_success_probability, exhaustive_optimal

log = logging.getLogger(__name__)

CURVE_COLUMNS = ("t", "R_mean", "R_std", "P_mean", "P_std", "P_star", "helstrom", "homodyne")
SWEEP_COLUMNS = ("value", "R_t", "P_t", "P_star")


def geometric_checkpoints(T: int, per_decade: int = 25) -> tuple[int, ...]:
    """Roughly log-uniform episode indices in [1, T], always including T."""
    if T < 1:
        return ()
    n = int(np.ceil(np.log10(T) * per_decade)) + 1
    pts = np.unique(np.round(np.logspace(0, np.log10(T), max(n, 1))).astype(np.int64))
    pts = pts[(pts >= 1) & (pts <= T)]
    return tuple(int(p) for p in np.union1d(pts, [T]))


@dataclass(frozen=True)
class ExperimentConfig:
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    policy: PolicySpec = field(default_factory=PolicySpec)
    T: int = 500_000
    n_agents: int = 24
    checkpoints: Optional[tuple[int, ...]] = None
    base_seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.n_agents < 1:
            raise ValueError("n_agents must be at least 1")
        if self.checkpoints is None:
            object.__setattr__(self, "checkpoints", geometric_checkpoints(self.T))
        cps = tuple(int(c) for c in self.checkpoints)
        if list(cps) != sorted(set(cps)) or (cps and (cps[0] < 1 or cps[-1] > self.T)):
            raise ValueError("checkpoints must be strictly increasing within [1, T]")
        object.__setattr__(self, "checkpoints", cps)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class LearningCurves:
    """R_t and P_t per agent (rows) and checkpoint (columns)."""

    t: np.ndarray
    R: np.ndarray
    P: np.ndarray
    reward_counts: np.ndarray

    @property
    def n_agents(self) -> int:
        return self.R.shape[0]

    @property
    def R_mean(self) -> np.ndarray:
        return self.R.mean(axis=0)

    @property
    def R_std(self) -> np.ndarray:
        return self.R.std(axis=0)

    @property
    def P_mean(self) -> np.ndarray:
        return self.P.mean(axis=0)

    @property
    def P_std(self) -> np.ndarray:
        return self.P.std(axis=0)

    def at(self, t: int) -> int:
        return int(np.searchsorted(self.t, t))

    @classmethod
    def stack(cls, runs: Sequence["LearningCurves"]) -> "LearningCurves":
        return cls(
            runs[0].t,
            np.vstack([r.R for r in runs]),
            np.vstack([r.P for r in runs]),
            np.vstack([r.reward_counts for r in runs]),
        )


def run_agent(seed: int, config: ExperimentConfig, return_table: bool = False):
    """Train one agent and record R_t, P_t at each checkpoint.

    P_t is the exact success probability (under the configured noise) of the
    agent's greedy tree at that moment.
    """
    rc = config.receiver
    agent = Agent(rc, config.policy, np.random.default_rng(seed))
    cps = np.asarray(config.checkpoints, dtype=np.int64)
    R = np.zeros(len(cps))
    P = np.zeros(len(cps))
    counts = np.zeros(len(cps), dtype=np.int64)
    cache: dict[bytes, float] = {}
    for i, t in enumerate(cps):
        agent.train(int(t) - agent.t)
        tree = agent.greedy_tree()
        key = b"".join(np.asarray(b).tobytes() for b in tree.betas) + tree.guesses.tobytes()
        if key not in cache:
            cache[key] = exact_success_probability(rc.alpha, tree, rc)
        P[i] = cache[key]
        counts[i] = agent.total_reward
        R[i] = agent.total_reward / agent.t
    if agent.t < config.T:
        agent.train(config.T - agent.t)
    curves = LearningCurves(cps, R[None], P[None], counts[None])
    if return_table:
        return curves, agent.table
    return curves


def _run_agent_job(args):
    return run_agent(*args)


def run_ensemble(config: ExperimentConfig, workers: int = 1, return_tables: bool = False):
    """Agents use seeds ``base_seed + i``; results are ordered by agent index.

    With ``return_tables`` the final table of every agent is returned too.
    """
    jobs = [(config.base_seed + i, config, return_tables) for i in range(config.n_agents)]
    if workers > 1 and config.n_agents > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_agent_job, jobs))
    else:
        runs = [_run_agent_job(j) for j in jobs]
    if return_tables:
        return LearningCurves.stack([r[0] for r in runs]), [r[1] for r in runs]
    return LearningCurves.stack(runs)


def curve_rows(curves: LearningCurves, receiver: ReceiverConfig) -> list[tuple]:
    p_star, _ = exhaustive_optimal(receiver.alpha, receiver)
    hel, hom = helstrom_bound(receiver.alpha), homodyne_limit(receiver.alpha)
    return [
        (int(t), float(rm), float(rs), float(pm), float(ps), p_star, hel, hom)
        for t, rm, rs, pm, ps in zip(curves.t, curves.R_mean, curves.R_std, curves.P_mean, curves.P_std)
    ]


SWEEP_PARAMETERS = ("alpha", "p_dc", "p_f")


def _with_parameter(receiver: ReceiverConfig, parameter: str, value: float) -> ReceiverConfig:
    if parameter == "alpha":
        return dataclasses.replace(receiver, alpha=float(value))
    if parameter == "p_dc":
        return dataclasses.replace(receiver, noise=NoiseConfig(float(value), receiver.noise.p_f))
    if parameter == "p_f":
        return dataclasses.replace(receiver, noise=NoiseConfig(receiver.noise.p_dc, float(value)))
    raise ValueError(f"cannot sweep {parameter!r}; choose from {SWEEP_PARAMETERS}")


@dataclass
class SweepPoint:
    value: float
    R_t: float
    P_t: float
    P_star: float
    R_std: float
    P_std: float


def sweep(
    parameter: str, values: Sequence[float], config: ExperimentConfig, eval_episode: int, workers: int = 1
) -> list[SweepPoint]:
    """Train an ensemble per parameter value and report R_t, P_t at ``eval_episode``."""
    if eval_episode > config.T or eval_episode < 1:
        raise ValueError("eval_episode must lie in [1, T]")
    out = []
    for v in values:
        receiver = _with_parameter(config.receiver, parameter, v)
        exp = config.replace(receiver=receiver, T=eval_episode, checkpoints=(eval_episode,))
        curves = run_ensemble(exp, workers)
        p_star, _ = exhaustive_optimal(receiver.alpha, receiver)
        log.info("%s=%g: R=%.4f P=%.4f P*=%.4f", parameter, v, curves.R_mean[-1], curves.P_mean[-1], p_star)
        out.append(SweepPoint(float(v), float(curves.R_mean[-1]), float(curves.P_mean[-1]), p_star,
                              float(curves.R_std[-1]), float(curves.P_std[-1])))
    return out


def replay(tree, receiver: ReceiverConfig, episodes: int, rng: np.random.Generator) -> int:
    """Successes of a fixed tree over fresh simulated episodes."""
    policy = tree.as_policy()
    return sum(run_episode(rng, receiver, policy).reward for _ in range(episodes))


__all__ = [
    "CURVE_COLUMNS", "SWEEP_COLUMNS", "ExperimentConfig", "LearningCurves", "QTable", "SweepPoint",
    "curve_rows", "geometric_checkpoints", "replay", "run_agent", "run_ensemble", "sweep",
]
