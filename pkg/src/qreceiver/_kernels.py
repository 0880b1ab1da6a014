"""Compiled inner loops for training agents and bandits.

Every routine takes the caller's ``numpy.random.Generator`` and draws from
it in the same order as the pure-Python reference path, so both paths give
bit-identical results for the same seed.
"""
import math

import numpy as np
from numba import njit

EPSILON_GREEDY, EXP_GREEDY, UCB, THOMPSON = 0, 1, 2, 3
UCB1, UCB2, UCB3 = 0, 1, 2


@njit(cache=True)
def argmax_first(x, start, n):
    best, arg = x[start], 0
    for i in range(1, n):
        if x[start + i] > best:
            best, arg = x[start + i], i
    return arg


@njit(cache=True)
def select_epsilon(rng, q, start, n, eps):
    if rng.random() < eps:
        return rng.integers(0, n)
    return argmax_first(q, start, n)


@njit(cache=True)
def neg_log_confidence(schedule, t, visits):
    """-log P(t) of the Hoeffding bonus, clamped at zero."""
    lt = math.log(t)
    if schedule == UCB1:
        v = 4.0 * lt
    elif schedule == UCB2:
        v = math.log(1.0 + t * lt * lt)
    else:
        v = -lt / visits
    return max(v, 0.0)


@njit(cache=True)
def select_ucb(q, visits, start, n, t, schedule):
    for i in range(n):
        if visits[start + i] == 0:
            return i
    best, arg = -np.inf, 0
    for i in range(n):
        nv = visits[start + i]
        score = q[start + i] + math.sqrt(neg_log_confidence(schedule, t, nv) / (2.0 * nv))
        if score > best:
            best, arg = score, i
    return arg


@njit(cache=True)
def select_thompson(rng, mu, nu, start, n):
    best, arg = -1.0, 0
    for i in range(n):
        s = rng.beta(mu[start + i], nu[start + i])
        if s > best:
            best, arg = s, i
    return arg


@njit(cache=True)
def q_update(q, visits, offsets, g, L, hs, acts, reward):
    """Forward pass of one-step Q-learning updates with 1/N learning rates."""
    for ell in range(L + 1):
        n = g if ell < L else 2
        e = offsets[ell] + hs[ell] * n + acts[ell]
        visits[e] += 1
        if ell < L:
            nn = g if ell + 1 < L else 2
            s = offsets[ell + 1] + hs[ell + 1] * nn
            target = q[s]
            for i in range(1, nn):
                if q[s + i] > target:
                    target = q[s + i]
        else:
            target = float(reward)
        q[e] += (target - q[e]) / visits[e]


@njit(cache=True)
def ts_update(mu, nu, visits, offsets, g, L, hs, acts, reward):
    for ell in range(L + 1):
        n = g if ell < L else 2
        e = offsets[ell] + hs[ell] * n + acts[ell]
        visits[e] += 1
        mu[e] += reward
        nu[e] += 1 - reward


@njit(cache=True)
def train_episodes(
    rng, kind, eps, tau, eps0, schedule,
    q, visits, mu, nu, offsets, g, L,
    betas, thetas, alpha, prior0, p_dc, p_f,
    t0, rewards,
):
    """Run ``len(rewards)`` episodes numbered ``t0, t0 + 1, ...``; rewards are written in place."""
    hs = np.zeros(L + 1, dtype=np.int64)
    acts = np.zeros(L + 1, dtype=np.int64)
    for i in range(rewards.shape[0]):
        t = t0 + i
        if kind == EXP_GREEDY:
            eps_t = max(math.exp(-t / tau), eps0)
        else:
            eps_t = eps
        k = 0 if rng.random() < prior0 else 1
        flipped = rng.random() < p_f
        amp = -alpha if (k == 1) != flipped else alpha
        h = 0
        for ell in range(L + 1):
            n = g if ell < L else 2
            start = offsets[ell] + h * n
            if kind == THOMPSON:
                a = select_thompson(rng, mu, nu, start, n)
            elif kind == UCB:
                a = select_ucb(q, visits, start, n, t, schedule)
            else:
                a = select_epsilon(rng, q, start, n, eps_t)
            hs[ell] = h
            acts[ell] = a
            if ell < L:
                th = thetas[ell]
                reflected = amp * math.sqrt(1.0 - th)
                amp = amp * math.sqrt(th)
                x = reflected + betas[a]
                p0 = (1.0 - p_dc) * math.exp(-x * x)
                o = 0 if rng.random() < p0 else 1
                h = (h * g + a) * 2 + o
        r = 1 if acts[L] == k else 0
        if kind == THOMPSON:
            ts_update(mu, nu, visits, offsets, g, L, hs, acts, r)
        else:
            q_update(q, visits, offsets, g, L, hs, acts, r)
        rewards[i] = r


@njit(cache=True)
def bandit_run(rng, kind, eps, tau, eps0, schedule, arms, T, chosen, rewards, recommended):
    """Single bandit agent over ``T`` rounds; outputs are written in place."""
    K = arms.shape[0]
    q = np.zeros(K)
    visits = np.zeros(K, dtype=np.int64)
    mu = np.ones(K)
    nu = np.ones(K)
    for i in range(T):
        t = i + 1
        if kind == THOMPSON:
            a = select_thompson(rng, mu, nu, 0, K)
        elif kind == UCB:
            a = select_ucb(q, visits, 0, K, t, schedule)
        else:
            eps_t = max(math.exp(-t / tau), eps0) if kind == EXP_GREEDY else eps
            a = select_epsilon(rng, q, 0, K, eps_t)
        r = 1 if rng.random() < arms[a] else 0
        visits[a] += 1
        if kind == THOMPSON:
            mu[a] += r
            nu[a] += 1 - r
            best, rec = -1.0, 0
            for j in range(K):
                m = mu[j] / (mu[j] + nu[j])
                if m > best:
                    best, rec = m, j
        else:
            q[a] += (r - q[a]) / visits[a]
            rec = argmax_first(q, 0, K)
        chosen[i] = a
        rewards[i] = r
        recommended[i] = rec
