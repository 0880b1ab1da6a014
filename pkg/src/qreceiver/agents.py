"""Model-free learners over the history-indexed decision process.

The agent only sees grid indices of the displacements it chose and the
detector outcomes.  A history ``(a_0, o_1, ..., a_{l-1}, o_l)`` is encoded as
the integer ``h`` built by ``h <- (h * g + a) * 2 + o`` starting from 0, and
the table stores one row of ``g`` entries per history below the last layer
and one row of 2 guess entries per full history.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels as K
from .env import EpisodeRecord, LayerAction, ReceiverConfig, fixed_attenuations, run_episode
from .errors import ContractViolation, ScheduleError
from .planner import ActionTree

POLICY_KINDS = ("epsilon_greedy", "exp_greedy", "ucb", "thompson")
SCHEDULES = ("UCB-1", "UCB-2", "UCB-3")
_KIND_CODE = {"epsilon_greedy": K.EPSILON_GREEDY, "exp_greedy": K.EXP_GREEDY, "ucb": K.UCB, "thompson": K.THOMPSON}
_SCHEDULE_CODE = {"UCB-1": K.UCB1, "UCB-2": K.UCB2, "UCB-3": K.UCB3}


@dataclass(frozen=True)
class PolicySpec:
    kind: str = "epsilon_greedy"
    epsilon: float = 0.3
    tau: float = 200.0
    epsilon0: float = 0.01
    confidence_schedule: str = "UCB-1"

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}; expected one of {POLICY_KINDS}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not 0.0 < self.epsilon0 <= 1.0:
            raise ValueError("epsilon0 must lie in (0, 1]")
        if self.confidence_schedule not in SCHEDULES:
            raise ValueError(f"unknown confidence schedule {self.confidence_schedule!r}")

    def epsilon_at(self, t: int) -> float:
        if self.kind == "exp_greedy":
            return max(math.exp(-t / self.tau), self.epsilon0)
        return self.epsilon

    @property
    def label(self) -> str:
        if self.kind == "epsilon_greedy":
            return f"{self.epsilon:g}-greedy"
        if self.kind == "ucb":
            return self.confidence_schedule
        return {"exp_greedy": "exp-greedy", "thompson": "TS"}[self.kind]

    def kernel_args(self) -> tuple:
        return (
            _KIND_CODE[self.kind],
            float(self.epsilon),
            float(self.tau),
            float(self.epsilon0),
            _SCHEDULE_CODE[self.confidence_schedule],
        )


def encode_history(pairs: Sequence[tuple[int, int]], g: int) -> int:
    """Integer code of a history given as ``(action_index, outcome)`` pairs."""
    h = 0
    for a, o in pairs:
        if not 0 <= a < g or o not in (0, 1):
            raise ContractViolation(f"invalid history step ({a}, {o}) for a {g}-action grid")
        h = (h * g + a) * 2 + o
    return h


def decode_history(level: int, h: int, g: int) -> tuple[tuple[int, int], ...]:
    pairs = []
    for _ in range(level):
        h, o = divmod(h, 2)
        h, a = divmod(h, g)
        pairs.append((a, o))
    return tuple(reversed(pairs))


class QTable:
    """Per history-action estimates, visit counts and Beta posteriors."""

    def __init__(self, g: int, L: int):
        self.g, self.L = g, L
        sizes = [(2 * g) ** ell * g for ell in range(L)] + [(2 * g) ** L * 2]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        n = int(self.offsets[-1])
        self.q = np.zeros(n)
        self.visits = np.zeros(n, dtype=np.int64)
        self.mu = np.ones(n)
        self.nu = np.ones(n)

    @classmethod
    def for_config(cls, config: ReceiverConfig) -> "QTable":
        return cls(config.n_beta, config.L)

    def __len__(self) -> int:
        return int(self.offsets[-1])

    def n_actions(self, level: int) -> int:
        return self.g if level < self.L else 2

    def row_start(self, level: int, h: int) -> int:
        n_hist = (2 * self.g) ** level
        if not 0 <= h < n_hist:
            raise ContractViolation(f"history code {h} out of range at level {level}")
        return int(self.offsets[level]) + h * self.n_actions(level)

    def row(self, level: int, h: int) -> slice:
        s = self.row_start(level, h)
        return slice(s, s + self.n_actions(level))

    def posterior_mean(self) -> np.ndarray:
        return self.mu / (self.mu + self.nu)

    def copy(self) -> "QTable":
        new = QTable(self.g, self.L)
        new.q, new.visits, new.mu, new.nu = self.q.copy(), self.visits.copy(), self.mu.copy(), self.nu.copy()
        return new

    # snapshot export -------------------------------------------------------

    SNAPSHOT_COLUMNS = ("history", "action", "visits", "q_hat", "mu", "nu")

    def snapshot_rows(self) -> Iterable[tuple]:
        for level in range(self.L + 1):
            n = self.n_actions(level)
            for h in range((2 * self.g) ** level):
                key = ";".join(f"{a},{o}" for a, o in decode_history(level, h, self.g))
                s = int(self.offsets[level]) + h * n
                for a in range(n):
                    e = s + a
                    yield key, a, int(self.visits[e]), repr(float(self.q[e])), repr(float(self.mu[e])), repr(float(self.nu[e]))

    def write_snapshot(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.SNAPSHOT_COLUMNS)
            w.writerows(self.snapshot_rows())

    @classmethod
    def read_snapshot(cls, path, g: int, L: int) -> "QTable":
        table = cls(g, L)
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != cls.SNAPSHOT_COLUMNS:
                raise ContractViolation(f"snapshot header {reader.fieldnames} is not {cls.SNAPSHOT_COLUMNS}")
            count = 0
            for row in reader:
                key = row["history"]
                pairs = [tuple(int(x) for x in step.split(",")) for step in key.split(";")] if key else []
                level = len(pairs)
                if level > L:
                    raise ContractViolation(f"snapshot history {key!r} is deeper than L={L}")
                a = int(row["action"])
                if not 0 <= a < table.n_actions(level):
                    raise ContractViolation(f"snapshot action {a} invalid at level {level}")
                e = table.row_start(level, encode_history(pairs, g)) + a
                table.visits[e] = int(row["visits"])
                table.q[e] = float(row["q_hat"])
                table.mu[e] = float(row["mu"])
                table.nu[e] = float(row["nu"])
                count += 1
        if count != len(table):
            raise ContractViolation(f"snapshot has {count} rows, expected {len(table)} for g={g}, L={L}")
        return table


# action selection ------------------------------------------------------------


def select_action_epsilon_greedy(rng: np.random.Generator, table: QTable, level: int, h: int, epsilon_t: float) -> int:
    if not 0.0 <= epsilon_t <= 1.0:
        raise ValueError("epsilon_t must lie in [0, 1]")
    n = table.n_actions(level)
    if n == 0:
        raise ContractViolation("no actions available")
    return int(K.select_epsilon(rng, table.q, table.row_start(level, h), n, float(epsilon_t)))


def confidence_bonus(schedule: str, t: int, visits: int) -> float:
    """Hoeffding exploration bonus sqrt(-log P(t) / (2 N))."""
    if t < 1:
        raise ScheduleError(f"episode index must be >= 1, got {t}")
    if visits < 1:
        raise ScheduleError("the bonus is undefined for unvisited pairs")
    return math.sqrt(K.neg_log_confidence(_SCHEDULE_CODE[schedule], float(t), float(visits)) / (2.0 * visits))


def select_action_ucb(table: QTable, level: int, h: int, t: int, schedule: str = "UCB-1") -> int:
    if t < 1:
        raise ScheduleError(f"episode index must be >= 1, got {t}")
    n = table.n_actions(level)
    return int(K.select_ucb(table.q, table.visits, table.row_start(level, h), n, float(t), _SCHEDULE_CODE[schedule]))


def select_action_thompson(rng: np.random.Generator, table: QTable, level: int, h: int) -> int:
    return int(K.select_thompson(rng, table.mu, table.nu, table.row_start(level, h), table.n_actions(level)))


# updates ----------------------------------------------------------------------


def _trace_indices(table: QTable, trace: EpisodeRecord, betas: np.ndarray):
    L = table.L
    if len(trace.actions) != L or len(trace.outcomes) != L:
        raise ContractViolation("episode trace must hold one action and one outcome per layer")
    hs = np.zeros(L + 1, dtype=np.int64)
    acts = np.zeros(L + 1, dtype=np.int64)
    h = 0
    for ell, (action, o) in enumerate(zip(trace.actions, trace.outcomes)):
        a = int(np.argmin(np.abs(betas - action.beta)))
        hs[ell], acts[ell] = h, a
        h = (h * table.g + a) * 2 + o
    hs[L], acts[L] = h, trace.guess
    return hs, acts


def q_update_episode(table: QTable, trace: EpisodeRecord, beta_grid: Sequence[float]) -> None:
    hs, acts = _trace_indices(table, trace, np.asarray(beta_grid))
    K.q_update(table.q, table.visits, table.offsets, table.g, table.L, hs, acts, trace.reward)


def ts_update_episode(table: QTable, trace: EpisodeRecord, beta_grid: Sequence[float]) -> None:
    hs, acts = _trace_indices(table, trace, np.asarray(beta_grid))
    K.ts_update(table.mu, table.nu, table.visits, table.offsets, table.g, table.L, hs, acts, trace.reward)


def greedy_action_tree(table: QTable, config: ReceiverConfig, mode: str = "q_greedy") -> ActionTree:
    """Follow the arg-max action from the empty history through every outcome branch."""
    if mode not in ("q_greedy", "ts_mean_greedy"):
        raise ValueError(f"unknown greedy mode {mode!r}")
    if (table.g, table.L) != (config.n_beta, config.L):
        raise ContractViolation("table shape does not match the receiver configuration")
    score = table.q if mode == "q_greedy" else table.posterior_mean()
    g, L = table.g, table.L
    thetas = fixed_attenuations(L)
    betas_out, thetas_out = [], []
    hist = np.zeros(1, dtype=np.int64)
    for ell in range(L + 1):
        n = table.n_actions(ell)
        rows = score[table.offsets[ell] + hist[:, None] * n + np.arange(n)[None, :]]
        best = np.argmax(rows, axis=1)
        if ell == L:
            guesses = best
            break
        betas_out.append(config.betas[best])
        thetas_out.append(np.full(len(hist), thetas[ell]))
        hist = ((hist * g + best)[:, None] * 2 + np.arange(2)[None, :]).ravel()
    return ActionTree(betas_out, thetas_out, guesses.astype(int))


# agent --------------------------------------------------------------------------


class Agent:
    """A learner bound to one receiver, one interaction policy and one RNG stream.

    ``train`` runs the compiled loop; ``step`` runs one episode through
    ``env.run_episode`` and is the slow reference path.  Both consume the
    random stream identically.
    """

    def __init__(self, config: ReceiverConfig, spec: PolicySpec, rng: np.random.Generator):
        if config.attenuation_mode != "fixed":
            raise ContractViolation("agents learn with fixed attenuations only")
        self.config, self.spec, self.rng = config, spec, rng
        self.table = QTable.for_config(config)
        self.t = 0
        self.total_reward = 0
        self._thetas = np.asarray(fixed_attenuations(config.L))
        self._history_actions: list[int] = []

    @property
    def greedy_mode(self) -> str:
        return "ts_mean_greedy" if self.spec.kind == "thompson" else "q_greedy"

    def greedy_tree(self) -> ActionTree:
        return greedy_action_tree(self.table, self.config, self.greedy_mode)

    def _choose(self, level: int, h: int) -> int:
        kind = self.spec.kind
        if kind == "thompson":
            return select_action_thompson(self.rng, self.table, level, h)
        if kind == "ucb":
            return select_action_ucb(self.table, level, h, self.t, self.spec.confidence_schedule)
        return select_action_epsilon_greedy(self.rng, self.table, level, h, self.spec.epsilon_at(self.t))

    def policy(self, history) -> LayerAction | int:
        level = len(history)
        if level == 0:
            self._history_actions = []
        pairs = [(a, o) for a, (_, o) in zip(self._history_actions, history)]
        a = self._choose(level, encode_history(pairs, self.table.g))
        if level == self.config.L:
            return a
        self._history_actions.append(a)
        return LayerAction(self.config.beta_grid[a], float(self._thetas[level]))

    def step(self) -> EpisodeRecord:
        self.t += 1
        record = run_episode(self.rng, self.config, self.policy)
        if self.spec.kind == "thompson":
            ts_update_episode(self.table, record, self.config.beta_grid)
        else:
            q_update_episode(self.table, record, self.config.beta_grid)
        self.total_reward += record.reward
        return record

    def train(self, n_episodes: int) -> np.ndarray:
        """Run ``n_episodes`` more episodes; returns their rewards."""
        rewards = np.zeros(n_episodes, dtype=np.int64)
        if n_episodes == 0:
            return rewards
        c = self.config
        K.train_episodes(
            self.rng, *self.spec.kernel_args(),
            self.table.q, self.table.visits, self.table.mu, self.table.nu, self.table.offsets,
            self.table.g, c.L, c.betas, self._thetas, float(c.alpha), c.priors[0],
            c.noise.p_dc, c.noise.p_f, self.t + 1, rewards,
        )
        self.t += n_episodes
        self.total_reward += int(rewards.sum())
        return rewards
