"""Compiled inner loop for games where every agent is tabular.

Random draws are generated outside the kernel from each agent's seeded
``numpy.random.Generator`` and passed in per chunk, so trajectories depend only
on the seed and never on numba's internal generator.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NO_FORCE = -1


@njit(cache=True)
def _argmax(row):
    best = 0
    v = row[0]
    for i in range(1, row.shape[0]):
        if row[i] > v:
            v = row[i]
            best = i
    return best


@njit(cache=True)
def tabular_chunk(q, greedy, state, t0, n_steps, shaped, raw, alpha, gamma, beta,
                  learns, explores, u_explore, u_action, forced, n_actions, n_joint,
                  keep_mod, stable, stable_target, stop_on_converge,
                  out_actions, out_rewards):
    """Advance ``n_steps`` periods in place.

    Returns (steps executed, final state, stable counter, steps executed when
    convergence first fired or -1). The stable counter counts consecutive
    periods in which no agent's greedy action changed in any state; convergence
    fires when it reaches ``stable_target``.
    """
    n_agents = q.shape[0]
    acts = np.empty(n_agents, dtype=np.int64)
    converged_at = -1
    done = 0
    for i in range(n_steps):
        t = t0 + i
        joint = 0
        mult = 1
        for k in range(n_agents):
            a = forced[i, k]
            if a < 0:
                if explores[k] and u_explore[i, k] < math.exp(-beta[k] * t):
                    a = u_action[i, k]
                else:
                    a = greedy[k, state]
            acts[k] = a
            joint += a * mult
            mult *= n_actions
        nxt = (state % keep_mod) * n_joint + joint
        for k in range(n_agents):
            out_actions[i, k] = acts[k]
            out_rewards[i, k] = raw[joint, k]
            if learns[k]:
                a = acts[k]
                best_next = q[k, nxt, 0]
                for b in range(1, n_actions):
                    if q[k, nxt, b] > best_next:
                        best_next = q[k, nxt, b]
                old = q[k, state, a]
                q[k, state, a] = old + alpha[k] * (shaped[joint, k] + gamma[k] * best_next - old)
                g = _argmax(q[k, state])
                if g != greedy[k, state]:
                    greedy[k, state] = g
                    stable = -1
        stable += 1
        state = nxt
        done = i + 1
        if stable >= stable_target and converged_at < 0:
            converged_at = done
            if stop_on_converge:
                break
    return done, state, stable, converged_at


@njit(cache=True)
def greedy_cycle(greedy, state, n_actions, n_joint, keep_mod, max_len):
    """Follow greedy play from ``state`` until a state repeats.

    Returns (states visited before the repeat, index where the cycle starts).
    """
    n_agents = greedy.shape[0]
    path = np.empty(max_len + 1, dtype=np.int64)
    n = 0
    s = state
    while n <= max_len:
        for j in range(n):
            if path[j] == s:
                return path[:n].copy(), j
        path[n] = s
        n += 1
        joint = 0
        mult = 1
        for k in range(n_agents):
            joint += greedy[k, s] * mult
            mult *= n_actions
        s = (s % keep_mod) * n_joint + joint
    return path[:n].copy(), -1
