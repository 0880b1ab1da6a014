import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from qreceiver.env import (
    LayerAction,
    NoiseConfig,
    ReceiverConfig,
    beam_split,
    default_beta_grid,
    displaced_amplitude,
    fixed_attenuations,
    helstrom_bound,
    homodyne_limit,
    prob_no_click,
    run_episode,
)
from qreceiver.errors import ContractViolation
from qreceiver.planner import ActionTree, exact_success_probability

amplitudes = st.floats(-3.0, 3.0, allow_nan=False)
unit = st.floats(0.0, 1.0)


def test_beam_split_endpoints():
    assert beam_split(0.7, 1.0) == (0.7, 0.0)
    assert beam_split(0.7, 0.0) == (0.0, 0.7)


@given(amplitudes, unit)
def test_beam_split_conserves_energy(a, theta):
    t, r = beam_split(a, theta)
    assert t * t + r * r == pytest.approx(a * a, abs=1e-12)


def test_beam_split_rejects_bad_theta():
    with pytest.raises(ValueError):
        beam_split(0.4, 1.5)
    with pytest.raises(ValueError):
        LayerAction(0.0, -0.1)


def test_displaced_amplitude():
    assert displaced_amplitude(0.4, LayerAction(-0.4, 0.0)) == 0.0
    assert displaced_amplitude(0.4, LayerAction(0.1, 0.75)) == pytest.approx(0.3)


def test_prob_no_click_values():
    assert prob_no_click(0.0) == 1.0
    assert prob_no_click(0.0, p_dc=1.0) == 0.0
    assert prob_no_click(0.5, p_dc=0.2) == pytest.approx(0.8 * math.exp(-0.25))
    arr = prob_no_click(np.array([0.0, 1.0]))
    np.testing.assert_allclose(arr, [1.0, math.exp(-1.0)])


@given(amplitudes, unit)
def test_prob_no_click_is_a_probability(x, p_dc):
    p = prob_no_click(x, p_dc)
    assert 0.0 <= p <= 1.0
    assert p == prob_no_click(-x, p_dc)


@pytest.mark.parametrize("L", [1, 2, 3, 5, 8])
def test_fixed_attenuations_equalise_detector_amplitudes(L):
    thetas = fixed_attenuations(L)
    assert thetas[-1] == 0.0
    amp, seen = 1.0, []
    for th in thetas:
        amp, r = beam_split(amp, th)
        seen.append(r)
    np.testing.assert_allclose(seen, 1 / math.sqrt(L))
    assert amp == pytest.approx(0.0, abs=1e-12)


def test_fixed_attenuations_rejects_zero_layers():
    with pytest.raises(ValueError):
        fixed_attenuations(0)


def test_helstrom_against_high_precision():
    mpmath.mp.dps = 30
    for a in (0.0, 0.1, 0.4, 1.0):
        ref = 0.5 * (1 + mpmath.sqrt(1 - mpmath.e ** (-4 * mpmath.mpf(a) ** 2)))
        assert helstrom_bound(a) == pytest.approx(float(ref), abs=1e-15)


def test_homodyne_against_gaussian_integral():
    # quadrature of +-sqrt(2) alpha measured with variance 1/2, sign decision
    for a in (0.05, 0.4, 1.0):
        mean, sd = math.sqrt(2) * a, math.sqrt(0.5)
        dens = lambda x: math.exp(-((x - mean) ** 2) / (2 * sd * sd)) / (sd * math.sqrt(2 * math.pi))
        p, _ = integrate.quad(dens, 0, np.inf)
        assert homodyne_limit(a) == pytest.approx(p, abs=1e-10)
        assert homodyne_limit(-a) == homodyne_limit(a)


@given(st.floats(0.0, 3.0))
def test_bounds_ordering(a):
    assert 0.5 <= homodyne_limit(a) <= helstrom_bound(a) + 1e-15 <= 1.0 + 1e-15


def test_config_validation():
    with pytest.raises(ValueError):
        ReceiverConfig(L=0)
    with pytest.raises(ValueError):
        ReceiverConfig(beta_grid=(0.1, 0.0))
    with pytest.raises(ValueError):
        ReceiverConfig(beta_grid=())
    with pytest.raises(ValueError):
        ReceiverConfig(priors=(0.7, 0.7))
    with pytest.raises(ValueError):
        ReceiverConfig(attenuation_mode="greedy")
    with pytest.raises(ValueError):
        NoiseConfig(p_dc=1.2)


def test_default_grid():
    g = default_beta_grid()
    assert len(g) == 21 and g[0] == -1.0 and g[-1] == 1.0
    assert -0.4 in g and -0.7 in g


def test_beta_index_rejects_off_grid():
    cfg = ReceiverConfig()
    assert cfg.beta_index(-0.4) == 6
    with pytest.raises(ContractViolation):
        cfg.beta_index(-0.45)


def _kennedy_policy(cfg):
    return ActionTree.constant(cfg, -0.4, [0, 1]).as_policy()


def test_run_episode_record_and_noise_free_null():
    cfg = ReceiverConfig(L=1, beta_grid=(-0.4,))
    rng = np.random.default_rng(3)
    for _ in range(200):
        rec = run_episode(rng, cfg, _kennedy_policy(cfg))
        assert len(rec.outcomes) == len(rec.actions) == 1
        assert rec.reward == int(rec.guess == rec.true_k)
        if rec.true_k == 0:
            # displaced to vacuum: never clicks
            assert rec.outcomes == [0]


def test_run_episode_monte_carlo_matches_exact():
    cfg = ReceiverConfig(alpha=0.4, L=2, noise=NoiseConfig(p_dc=0.1, p_f=0.2))
    tree = ActionTree.constant(cfg, -0.4, [0, 1, 1, 1])
    exact = exact_success_probability(cfg.alpha, tree, cfg)
    rng = np.random.default_rng(11)
    n = 40_000
    wins = sum(run_episode(rng, cfg, tree.as_policy()).reward for _ in range(n))
    assert abs(wins / n - exact) < 4 * math.sqrt(exact * (1 - exact) / n)


def test_run_episode_is_deterministic_per_seed():
    cfg = ReceiverConfig(noise=NoiseConfig(0.05, 0.1))
    tree = ActionTree.constant(cfg, -0.3, [0, 1, 1, 1])
    a = [run_episode(np.random.default_rng(5), cfg, tree.as_policy()) for _ in range(3)]
    assert all(r == a[0] for r in a)


def test_run_episode_contract_violations():
    cfg = ReceiverConfig()
    rng = np.random.default_rng(0)
    with pytest.raises(ContractViolation):
        run_episode(rng, cfg, lambda h: LayerAction(-0.45, 0.5) if len(h) < 2 else 0)
    with pytest.raises(ContractViolation):
        run_episode(rng, cfg, lambda h: LayerAction(-0.4, 0.3) if len(h) < 2 else 0)
    with pytest.raises(ContractViolation):
        run_episode(rng, cfg, lambda h: LayerAction(-0.4, [0.5, 0.0][len(h)]) if len(h) < 2 else 2)


def test_phase_flip_one_inverts_received_sign():
    cfg = ReceiverConfig(L=1, beta_grid=(-0.4,), noise=NoiseConfig(p_f=1.0))
    rng = np.random.default_rng(2)
    for _ in range(100):
        rec = run_episode(rng, cfg, _kennedy_policy(cfg))
        assert rec.flipped
        if rec.true_k == 1:
            assert rec.outcomes == [0]
