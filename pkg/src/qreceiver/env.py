"""Physical model of the layered displacement/photodetector receiver.

The signal is one of two real coherent amplitudes, ``+alpha`` (hypothesis 0)
or ``-alpha`` (hypothesis 1).  Each of the ``L`` layers taps part of the
remaining light with a beamsplitter, displaces the tapped part by ``beta``
and sends it to an on/off detector.  After the last layer a guess is made.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import ContractViolation

ATTENUATION_MODES = ("fixed", "adaptive")


def default_beta_grid(n: int = 21, lo: float = -1.0, hi: float = 1.0) -> tuple[float, ...]:
    """Uniform displacement grid, rounded so that e.g. -0.4 is exactly representable."""
    return tuple(float(b) for b in np.round(np.linspace(lo, hi, n), 12))


@dataclass(frozen=True)
class LayerAction:
    beta: float
    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"transmissivity must lie in [0, 1], got {self.theta}")


@dataclass(frozen=True)
class NoiseConfig:
    p_dc: float = 0.0
    p_f: float = 0.0

    def __post_init__(self):
        for name in ("p_dc", "p_f"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class ReceiverConfig:
    """Receiver layout plus the source amplitude it is calibrated for.

    ``theta_points`` sets the resolution of the energy split searched by the
    planner in ``adaptive`` mode: each signal is divided into
    ``L * ceil((theta_points - 1) / L)`` equal energy quanta, so the equal
    split used in ``fixed`` mode is always one of the candidates.
    """

    alpha: float = 0.4
    L: int = 2
    beta_grid: tuple[float, ...] = field(default_factory=default_beta_grid)
    attenuation_mode: str = "fixed"
    priors: tuple[float, float] = (0.5, 0.5)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    theta_points: int = 11

    def __post_init__(self):
        object.__setattr__(self, "beta_grid", tuple(float(b) for b in self.beta_grid))
        object.__setattr__(self, "priors", tuple(float(p) for p in self.priors))
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        if not self.beta_grid:
            raise ValueError("beta_grid must be non-empty")
        if any(b1 <= b0 for b0, b1 in zip(self.beta_grid, self.beta_grid[1:])):
            raise ValueError("beta_grid must be strictly increasing")
        if self.attenuation_mode not in ATTENUATION_MODES:
            raise ValueError(f"attenuation_mode must be one of {ATTENUATION_MODES}")
        if len(self.priors) != 2 or min(self.priors) < 0 or abs(sum(self.priors) - 1) > 1e-12:
            raise ValueError(f"priors must be two non-negative numbers summing to 1, got {self.priors}")
        if self.theta_points < 2:
            raise ValueError("theta_points must be at least 2")

    @property
    def n_beta(self) -> int:
        return len(self.beta_grid)

    @property
    def betas(self) -> np.ndarray:
        return np.asarray(self.beta_grid)

    @property
    def n_quanta(self) -> int:
        if self.attenuation_mode == "fixed":
            return self.L
        per_layer = math.ceil((self.theta_points - 1) / self.L)
        return self.L * per_layer

    def beta_index(self, beta: float) -> int:
        i = int(np.argmin(np.abs(self.betas - beta)))
        if abs(self.beta_grid[i] - beta) > 1e-9:
            raise ContractViolation(f"displacement {beta} is not on the configured grid")
        return i

    def fixed_actions(self, beta_indices: Sequence[int]) -> list[LayerAction]:
        thetas = fixed_attenuations(self.L)
        return [LayerAction(self.beta_grid[i], th) for i, th in zip(beta_indices, thetas)]


@dataclass
class EpisodeRecord:
    true_k: int
    flipped: bool
    outcomes: list[int]
    actions: list[LayerAction]
    guess: int
    reward: int


def beam_split(alpha_in: float, theta: float) -> tuple[float, float]:
    """Return the (transmitted, reflected) amplitudes of a beamsplitter."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"transmissivity must lie in [0, 1], got {theta}")
    return alpha_in * math.sqrt(theta), alpha_in * math.sqrt(1.0 - theta)


def displaced_amplitude(alpha_in: float, action: LayerAction) -> float:
    return alpha_in * math.sqrt(1.0 - action.theta) + action.beta


def prob_no_click(alpha_tilde, p_dc: float = 0.0):
    """Probability that an on/off detector stays dark.

    Accepts scalars or arrays.  A dark count fires independently with
    probability ``p_dc``.
    """
    if isinstance(alpha_tilde, np.ndarray):
        return (1.0 - p_dc) * np.exp(-alpha_tilde * alpha_tilde)
    return (1.0 - p_dc) * math.exp(-alpha_tilde * alpha_tilde)


def fixed_attenuations(L: int) -> list[float]:
    """Transmissivities giving every detector the same share of the signal.

    Layer ``l`` reflects ``1/(L - l)`` of what reaches it, so each detector
    sees amplitude ``alpha/sqrt(L)`` and the last layer keeps nothing back.
    """
    if L < 1:
        raise ValueError(f"need at least one layer, got L={L}")
    return [1.0 - 1.0 / (L - ell) for ell in range(L)]


def helstrom_bound(alpha: float) -> float:
    return 0.5 * (1.0 + math.sqrt(-math.expm1(-4.0 * alpha * alpha)))


def homodyne_limit(alpha: float) -> float:
    """Success probability of a homodyne measurement with a sign decision."""
    return 0.5 * (1.0 + math.erf(math.sqrt(2.0) * abs(alpha)))


Policy = Callable[[tuple], Union[LayerAction, int]]


def run_episode(rng: np.random.Generator, config: ReceiverConfig, policy: Policy) -> EpisodeRecord:
    """Simulate one discrimination experiment.

    ``policy(history)`` receives the tuple of ``(LayerAction, outcome)`` pairs
    seen so far and returns the next ``LayerAction``; once ``len(history) == L``
    it must return the guess (0 or 1).  Random numbers are drawn in a fixed
    order: hypothesis, phase flip, then one draw per layer for the outcome
    (a policy sharing ``rng`` draws before each layer's outcome draw).
    """
    p_dc, p_f = config.noise.p_dc, config.noise.p_f
    fixed = fixed_attenuations(config.L) if config.attenuation_mode == "fixed" else None

    true_k = 0 if rng.random() < config.priors[0] else 1
    flipped = bool(rng.random() < p_f)
    sign = -1.0 if (true_k == 1) != flipped else 1.0
    amp = sign * config.alpha

    history: list[tuple[LayerAction, int]] = []
    for ell in range(config.L):
        action = policy(tuple(history))
        if not isinstance(action, LayerAction):
            raise ContractViolation(f"policy must return a LayerAction at layer {ell}")
        config.beta_index(action.beta)
        if fixed is not None and abs(action.theta - fixed[ell]) > 1e-9:
            raise ContractViolation(
                f"layer {ell} transmissivity {action.theta} differs from the fixed value {fixed[ell]}"
            )
        amp, reflected = beam_split(amp, action.theta)
        p0 = prob_no_click(reflected + action.beta, p_dc)
        outcome = 0 if rng.random() < p0 else 1
        history.append((action, outcome))

    guess = policy(tuple(history))
    if guess not in (0, 1):
        raise ContractViolation(f"guess must be 0 or 1, got {guess!r}")
    return EpisodeRecord(
        true_k=true_k,
        flipped=flipped,
        outcomes=[o for _, o in history],
        actions=[a for a, _ in history],
        guess=int(guess),
        reward=int(guess == true_k),
    )
