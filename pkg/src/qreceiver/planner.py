"""Model-aware benchmarks for the layered receiver.

Three routes to the optimal success probability on a discrete action grid:

* ``exact_success_probability`` scores any fixed policy by enumerating all
  outcome strings;
* ``exhaustive_optimal`` runs backward induction over every history
  (feasible for small ``L``);
* ``dp_optimal_value`` runs the Bellman recursion on a one-dimensional belief
  grid with linear interpolation, which scales to larger ``L``.

Phase flips make the belief over the *sent* hypothesis insufficient, so the
belief tracked here is over the sign of the *received* amplitude; the
guessing stage maps it back to the sent hypothesis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .env import (
    LayerAction,
    NoiseConfig,
    ReceiverConfig,
    fixed_attenuations,
    prob_no_click,
)
from .errors import CapacityError, ContractViolation, DegenerateEvidence

MAX_LEAVES = 5_000_000


@dataclass
class ActionTree:
    """Deterministic receiver policy.

    Nodes at level ``l`` are indexed by the outcome prefix ``(o_1, ..., o_l)``
    read as a binary number with ``o_1`` most significant, so the children of
    node ``n`` are ``2n`` (no click) and ``2n + 1`` (click).
    """

    betas: list[np.ndarray]
    thetas: list[np.ndarray]
    guesses: np.ndarray

    @property
    def L(self) -> int:
        return len(self.betas)

    def validate(self, L: Optional[int] = None) -> None:
        depth = self.L
        if L is not None and depth != L:
            raise ContractViolation(f"tree depth {depth} does not match L={L}")
        if len(self.thetas) != depth:
            raise ContractViolation("betas and thetas must have one array per layer")
        for ell in range(depth):
            if np.shape(self.betas[ell]) != (2**ell,) or np.shape(self.thetas[ell]) != (2**ell,):
                raise ContractViolation(f"layer {ell} must hold {2**ell} actions")
            th = np.asarray(self.thetas[ell])
            if np.any(th < 0) or np.any(th > 1):
                raise ContractViolation(f"layer {ell} has a transmissivity outside [0, 1]")
        g = np.asarray(self.guesses)
        if g.shape != (2**depth,) or not np.all((g == 0) | (g == 1)):
            raise ContractViolation(f"tree needs {2**depth} guesses in {{0, 1}}")

    @staticmethod
    def node_index(outcomes: Sequence[int]) -> int:
        n = 0
        for o in outcomes:
            n = 2 * n + int(o)
        return n

    def action(self, outcomes: Sequence[int]) -> LayerAction:
        ell, n = len(outcomes), self.node_index(outcomes)
        return LayerAction(float(self.betas[ell][n]), float(self.thetas[ell][n]))

    def guess(self, outcomes: Sequence[int]) -> int:
        return int(self.guesses[self.node_index(outcomes)])

    def as_policy(self):
        """Adapter for ``env.run_episode``."""

        def policy(history):
            outcomes = [o for _, o in history]
            if len(outcomes) == self.L:
                return self.guess(outcomes)
            return self.action(outcomes)

        return policy

    def mirrored(self) -> "ActionTree":
        """The policy with every displacement negated and every guess swapped."""
        return ActionTree(
            betas=[-np.asarray(b, dtype=float) for b in self.betas],
            thetas=[np.array(t, dtype=float) for t in self.thetas],
            guesses=1 - np.asarray(self.guesses),
        )

    @classmethod
    def constant(cls, config: ReceiverConfig, beta: float, guesses: Sequence[int]) -> "ActionTree":
        """Same displacement at every node and fixed attenuations."""
        thetas = fixed_attenuations(config.L)
        return cls(
            betas=[np.full(2**ell, float(beta)) for ell in range(config.L)],
            thetas=[np.full(2**ell, thetas[ell]) for ell in range(config.L)],
            guesses=np.asarray(guesses, dtype=int),
        )


def _sign_weights(priors: Sequence[float], p_f: float) -> np.ndarray:
    """W[k, s] = P(sent k, received sign s); s = 0 means +alpha is received."""
    p0, p1 = priors
    return np.array([[p0 * (1 - p_f), p0 * p_f], [p1 * p_f, p1 * (1 - p_f)]])


def _outcome_likelihoods(alpha: float, tree: ActionTree, p_dc: float) -> np.ndarray:
    """P(o_{1:L} | received sign), shape (2**L, 2)."""
    cols = []
    for sign in (1.0, -1.0):
        amp = np.array([sign * alpha])
        lik = np.ones(1)
        for ell in range(tree.L):
            theta = np.asarray(tree.thetas[ell], dtype=float)
            alpha_tilde = amp * np.sqrt(1.0 - theta) + np.asarray(tree.betas[ell], dtype=float)
            p0 = prob_no_click(alpha_tilde, p_dc)
            lik = np.stack([lik * p0, lik * (1.0 - p0)], axis=1).ravel()
            amp = np.repeat(amp * np.sqrt(theta), 2)
        cols.append(lik)
    return np.stack(cols, axis=1)


def exact_success_probability(alpha: float, tree: ActionTree, config: ReceiverConfig) -> float:
    """Average success probability of ``tree``, enumerating all outcome strings."""
    tree.validate(config.L)
    lik = _outcome_likelihoods(alpha, tree, config.noise.p_dc)
    W = _sign_weights(config.priors, config.noise.p_f)
    guesses = np.asarray(tree.guesses, dtype=int)
    return float(np.sum(W[guesses] * lik))


def maximum_likelihood_guesses(alpha: float, tree: ActionTree, config: ReceiverConfig) -> np.ndarray:
    """Bayes-optimal guess per outcome string of ``tree``; ties go to hypothesis 0."""
    lik = _outcome_likelihoods(alpha, tree, config.noise.p_dc)
    joint = lik @ _sign_weights(config.priors, config.noise.p_f).T  # (leaf, k)
    return np.where(joint[:, 1] > joint[:, 0], 1, 0)


def single_layer_ml_success(
    alpha: float, beta: float, noise: NoiseConfig = NoiseConfig(), priors=(0.5, 0.5)
) -> float:
    """One detector, displacement ``beta``, maximum-likelihood guess per outcome."""
    W = _sign_weights(priors, noise.p_f)
    p0 = np.array([prob_no_click(alpha + beta, noise.p_dc), prob_no_click(-alpha + beta, noise.p_dc)])
    lik = np.stack([p0, 1.0 - p0])  # (outcome, sign)
    joint = lik @ W.T  # (outcome, k)
    return float(joint.max(axis=1).sum())


def belief_update(
    b0: float,
    outcome: int,
    action: LayerAction,
    layer_amplitudes: tuple[float, float],
    noise: NoiseConfig = NoiseConfig(),
) -> float:
    """Bayes update of P(hypothesis 0) after one detector outcome.

    ``layer_amplitudes`` are the amplitudes entering the layer under each
    hypothesis.
    """
    like = []
    for amp in layer_amplitudes:
        p0 = prob_no_click(amp * math.sqrt(1.0 - action.theta) + action.beta, noise.p_dc)
        like.append(p0 if outcome == 0 else 1.0 - p0)
    if like[0] <= 0.0 and like[1] <= 0.0:
        raise DegenerateEvidence(f"outcome {outcome} has zero likelihood under both hypotheses")
    num = like[0] * b0
    den = num + like[1] * (1.0 - b0)
    if den <= 0.0:
        # a certain belief meeting evidence it rules out stays where it was
        return b0
    return num / den


# ---------------------------------------------------------------------------
# shared action set
#
# An action is a (displacement, energy share) pair.  The signal energy is cut
# into ``n_quanta`` equal parts; an action spends ``u`` of the parts still
# available.  In fixed mode n_quanta = L and u = 1, which reproduces
# ``fixed_attenuations``.


@dataclass(frozen=True)
class _ActionSet:
    beta: np.ndarray
    quanta: np.ndarray
    n_quanta: int
    beta_index: np.ndarray

    @property
    def size(self) -> int:
        return len(self.beta)


def _action_set(config: ReceiverConfig) -> _ActionSet:
    betas = config.betas
    if config.attenuation_mode == "fixed":
        idx = np.arange(len(betas))
        return _ActionSet(betas.copy(), np.ones(len(betas), dtype=int), config.L, idx)
    nq = config.n_quanta
    bi, u = np.meshgrid(np.arange(len(betas)), np.arange(nq + 1), indexing="ij")
    bi, u = bi.ravel(), u.ravel()
    return _ActionSet(betas[bi], u, nq, bi)


def _transmissivity(config: ReceiverConfig, ell: int, used: int, remaining: int) -> float:
    if config.attenuation_mode == "fixed":
        return fixed_attenuations(config.L)[ell]
    if remaining == 0:
        return 1.0
    return 1.0 - used / remaining


def _action_no_click(alpha: float, acts: _ActionSet, p_dc: float) -> tuple[np.ndarray, np.ndarray]:
    amp = alpha * np.sqrt(acts.quanta / acts.n_quanta)
    return prob_no_click(amp + acts.beta, p_dc), prob_no_click(-amp + acts.beta, p_dc)


# ---------------------------------------------------------------------------
# exhaustive backward induction


@dataclass
class InductionResult:
    """Output of ``backward_induction``.

    ``q_values[l]`` has shape ``(H_l, A)`` for ``l < L`` and ``(H_L, 2)`` for
    the guess; entries are joint probabilities (unnormalised by the history
    probability) and invalid actions hold ``-inf``.  History ``h`` at level
    ``l`` has children ``(h * A + a) * 2 + o``.
    """

    p_star: float
    tree: ActionTree
    q_values: list[np.ndarray]
    actions: _ActionSet

    @property
    def first_action_values(self) -> np.ndarray:
        return self.q_values[0][0]


def backward_induction(alpha: float, config: ReceiverConfig, max_leaves: int = MAX_LEAVES) -> InductionResult:
    acts = _action_set(config)
    A, L = acts.size, config.L
    n_leaves = (2 * A) ** L
    if n_leaves > max_leaves:
        raise CapacityError(
            f"exhaustive search over {n_leaves} outcome histories exceeds the limit of {max_leaves}"
        )
    p0p, p0m = _action_no_click(alpha, acts, config.noise.p_dc)
    # (A, outcome, sign)
    step = np.stack([np.stack([p0p, p0m], axis=1), np.stack([1 - p0p, 1 - p0m], axis=1)], axis=1)

    lik = [np.ones((1, 2))]
    remaining = [np.array([acts.n_quanta])]
    for ell in range(L):
        lik.append((lik[-1][:, None, None, :] * step[None]).reshape(-1, 2))
        rem = remaining[-1][:, None] - acts.quanta[None, :]
        remaining.append(np.repeat(rem.ravel(), 2))

    W = _sign_weights(config.priors, config.noise.p_f)
    q_values: list[np.ndarray] = [None] * (L + 1)
    q_values[L] = lik[L] @ W.T
    value = q_values[L].max(axis=1)
    for ell in range(L - 1, -1, -1):
        q = value.reshape(-1, A, 2).sum(axis=2)
        valid = acts.quanta[None, :] <= remaining[ell][:, None]
        q = np.where(valid, q, -np.inf)
        q_values[ell] = q
        value = q.max(axis=1)

    tree = _tree_from_q(config, acts, q_values, remaining)
    return InductionResult(float(value[0]), tree, q_values, acts)


def _tree_from_q(config, acts, q_values, remaining) -> ActionTree:
    A, L = acts.size, config.L
    betas, thetas = [], []
    hist = np.zeros(1, dtype=np.int64)  # history index of each tree node
    for ell in range(L):
        best = np.argmax(q_values[ell][hist], axis=1)
        betas.append(acts.beta[best].astype(float))
        thetas.append(
            np.array(
                [_transmissivity(config, ell, int(acts.quanta[a]), int(remaining[ell][h])) for h, a in zip(hist, best)]
            )
        )
        hist = ((hist * A + best)[:, None] * 2 + np.arange(2)[None, :]).ravel()
    guesses = np.argmax(q_values[L][hist], axis=1)
    return ActionTree(betas, thetas, guesses.astype(int))


def exhaustive_optimal(alpha: float, config: ReceiverConfig, max_leaves: int = MAX_LEAVES):
    """Best success probability over all grid policies and the arg-max tree."""
    res = backward_induction(alpha, config, max_leaves)
    return res.p_star, res.tree


def first_action_values(alpha: float, config: ReceiverConfig) -> np.ndarray:
    """Optimal success probability when the first action is forced, per first action."""
    return backward_induction(alpha, config).first_action_values.copy()


# ---------------------------------------------------------------------------
# belief-grid dynamic programming


@dataclass
class BeliefGrid:
    """Uniform grid on [0, 1] holding the optimal value per layer.

    ``value_table[l, e, i]`` is the optimal value at layer ``l`` with ``e``
    energy quanta left and belief ``values[i]`` that the received amplitude is
    ``+alpha``.  Combinations that cannot occur stay NaN.
    """

    n_points: int = 1001
    values: np.ndarray = field(init=False, repr=False)
    value_table: Optional[np.ndarray] = field(default=None, repr=False)
    alpha: Optional[float] = None
    config: Optional[ReceiverConfig] = None

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("a belief grid needs at least two points")
        self.values = np.linspace(0.0, 1.0, self.n_points)

    def layer_values(self, ell: int) -> np.ndarray:
        """Values at layer ``ell`` with the energy left by fixed attenuations."""
        nq = self.value_table.shape[1] - 1
        e = nq - ell if self.config.attenuation_mode == "fixed" else nq
        return self.value_table[ell, e]

    def interpolate(self, ell: int, e: int, b: np.ndarray) -> np.ndarray:
        v = self.value_table[ell, e]
        x = b * (self.n_points - 1)
        i = np.clip(np.floor(x).astype(np.int64), 0, self.n_points - 2)
        w = x - i
        return (1.0 - w) * v[i] + w * v[i + 1]


class _BeliefModel:
    """Bellman backup shared by value computation and policy extraction."""

    def __init__(self, alpha: float, config: ReceiverConfig, grid: BeliefGrid):
        self.config, self.grid, self.L = config, grid, config.L
        self.acts = _action_set(config)
        self.p0p, self.p0m = _action_no_click(alpha, self.acts, config.noise.p_dc)
        W = _sign_weights(config.priors, config.noise.p_f)
        ps = W.sum(axis=0)
        # P(sent k | received sign s); arbitrary where the sign never occurs
        self.post = np.where(ps > 0, W / np.where(ps > 0, ps, 1.0), 0.5)
        self.prior_belief = float(ps[0])

    def terminal(self, b: np.ndarray) -> np.ndarray:
        return np.maximum(self.post[0, 0] * b + self.post[0, 1] * (1 - b), self.post[1, 0] * b + self.post[1, 1] * (1 - b))

    def terminal_guess(self, b: float) -> int:
        g0 = self.post[0, 0] * b + self.post[0, 1] * (1 - b)
        g1 = self.post[1, 0] * b + self.post[1, 1] * (1 - b)
        return 0 if g0 >= g1 else 1

    def children(self, b: np.ndarray, a: np.ndarray):
        """Outcome probabilities and posteriors, each shaped (2, len(a), len(b))."""
        pp = np.stack([self.p0p[a], 1 - self.p0p[a]])[:, :, None]
        pm = np.stack([self.p0m[a], 1 - self.p0m[a]])[:, :, None]
        num = b[None, None, :] * pp
        prob = num + (1 - b)[None, None, :] * pm
        with np.errstate(invalid="ignore", divide="ignore"):
            post = np.where(prob > 0, num / np.where(prob > 0, prob, 1.0), b[None, None, :])
        return prob, post

    def q_values(self, ell: int, e: int, b: np.ndarray) -> np.ndarray:
        """Action values at layer ``ell`` with ``e`` quanta left, shape (A, len(b))."""
        acts = self.acts
        out = np.full((acts.size, len(b)), -np.inf)
        for u in np.unique(acts.quanta):
            if u > e:
                continue
            a = np.flatnonzero(acts.quanta == u)
            prob, post = self.children(b, a)
            if ell + 1 == self.L:
                nxt = self.terminal(post)
            else:
                nxt = self.grid.interpolate(ell + 1, e - u, post)
            out[a] = np.sum(prob * nxt, axis=0)
        return out

    def reachable_energy(self, ell: int) -> list[int]:
        nq = self.acts.n_quanta
        if self.config.attenuation_mode == "fixed":
            return [nq - ell]
        return list(range(nq + 1))


def dp_optimal_value(alpha: float, config: ReceiverConfig, grid: Optional[BeliefGrid] = None) -> float:
    """Optimal success probability from the belief-state Bellman recursion.

    Fills ``grid.value_table`` (needed by ``dp_policy_extract``) and returns
    the value at the prior belief, computed exactly at that belief rather
    than read off the grid.  Values one step before the guess use the exact
    terminal function, so ``L = 1`` carries no interpolation error.
    """
    grid = BeliefGrid() if grid is None else grid
    model = _BeliefModel(alpha, config, grid)
    nq, L, b = model.acts.n_quanta, config.L, grid.values
    table = np.full((L + 1, nq + 1, grid.n_points), np.nan)
    table[L, :, :] = model.terminal(b)[None, :]
    grid.value_table, grid.alpha, grid.config = table, alpha, config
    for ell in range(L - 1, -1, -1):
        for e in model.reachable_energy(ell):
            table[ell, e] = model.q_values(ell, e, b).max(axis=0)
    root = model.q_values(0, nq, np.array([model.prior_belief]))
    return float(root.max())


def dp_policy_extract(grid: BeliefGrid, alpha: Optional[float] = None, config: Optional[ReceiverConfig] = None) -> ActionTree:
    """Greedy tree w.r.t. a filled belief grid, walking forward from the prior.

    Beliefs along the walk are exact Bayes updates; only the look-ahead values
    come from the grid.  Unreachable branches keep the parent's belief.
    """
    if grid.value_table is None:
        raise ContractViolation("run dp_optimal_value on this grid first")
    alpha = grid.alpha if alpha is None else alpha
    config = grid.config if config is None else config
    model = _BeliefModel(alpha, config, grid)
    acts = model.acts
    beliefs = np.array([model.prior_belief])
    energy = np.array([acts.n_quanta])
    betas, thetas = [], []
    for ell in range(config.L):
        best = np.empty(len(beliefs), dtype=np.int64)
        for n, (bn, en) in enumerate(zip(beliefs, energy)):
            best[n] = int(np.argmax(model.q_values(ell, int(en), np.array([bn]))[:, 0]))
        betas.append(acts.beta[best].astype(float))
        thetas.append(
            np.array([_transmissivity(config, ell, int(acts.quanta[a]), int(e)) for a, e in zip(best, energy)])
        )
        new_b = np.empty(2 * len(beliefs))
        for n, (bn, a) in enumerate(zip(beliefs, best)):
            _, post = model.children(np.array([bn]), np.array([a]))
            new_b[2 * n : 2 * n + 2] = post[:, 0, 0]
        energy = np.repeat(energy - acts.quanta[best], 2)
        beliefs = new_b
    guesses = np.array([model.terminal_guess(bn) for bn in beliefs], dtype=int)
    return ActionTree(betas, thetas, guesses)
