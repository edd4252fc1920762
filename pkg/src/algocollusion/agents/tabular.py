"""Tabular Q-learning: exploration schedule, epsilon-greedy choice, the TD update
and an exact policy-evaluation oracle for small games."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..codec import encode, n_joint, n_states
from ..errors import DomainError, NumericalError, ParameterError, UnsupportedConfigError


@dataclass(frozen=True)
class AgentHyperparams:
    alpha: float = 0.125
    gamma: float = 0.95
    beta: float = 1e-5
    q_init_low: float = 0.0
    q_init_high: float = 1.0
    memory_len: int = 1

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            # alpha = 0 is accepted so frozen learners can share the update path
            if self.alpha != 0:
                raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0 <= self.gamma < 1:
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not self.beta > 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        if self.q_init_low > self.q_init_high:
            raise ParameterError("q_init_low must not exceed q_init_high")
        if self.memory_len < 1:
            raise ParameterError(f"memory_len must be >= 1, got {self.memory_len}")


@dataclass
class QTable:
    values: np.ndarray

    @classmethod
    def zeros(cls, n_states: int, n_actions: int) -> "QTable":
        return cls(np.zeros((n_states, n_actions)))

    @classmethod
    def uniform(cls, n_states: int, n_actions: int, low: float, high: float,
                rng: np.random.Generator) -> "QTable":
        return cls(rng.uniform(low, high, size=(n_states, n_actions)))

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def greedy(self, state: int) -> int:
        return int(np.argmax(self.values[state]))

    def greedy_policy(self) -> np.ndarray:
        return np.argmax(self.values, axis=1)


@dataclass(frozen=True)
class Transition:
    state: int | np.ndarray
    joint_actions: tuple[int, ...]
    reward: float
    next_state: int | np.ndarray


def epsilon(beta: float, t: int) -> float:
    return math.exp(-beta * t)


def select_action(values: Sequence[float], eps: float, rng: np.random.Generator) -> int:
    """Uniform random action with probability ``eps``, else argmax (lowest index on ties)."""
    values = np.asarray(values)
    if values.size == 0:
        raise DomainError("cannot select an action from an empty value list")
    if not 0 <= eps <= 1:
        raise DomainError(f"eps must lie in [0, 1], got {eps}")
    if rng.random() < eps:
        return int(rng.integers(values.size))
    return int(np.argmax(values))


def q_update(table: QTable, tr: Transition, hp: AgentHyperparams, agent: int = 0) -> float:
    s, s_next = int(tr.state), int(tr.next_state)
    a = int(tr.joint_actions[agent])
    if not (0 <= s < table.n_states and 0 <= s_next < table.n_states):
        raise DomainError(f"state index out of range: {s} -> {s_next}")
    if not 0 <= a < table.n_actions:
        raise DomainError(f"action {a} outside [0, {table.n_actions})")
    if not math.isfinite(tr.reward):
        raise DomainError(f"reward must be finite, got {tr.reward}")
    q = table.values[s, a]
    td = tr.reward + hp.gamma * table.values[s_next].max() - q
    table.values[s, a] = q + hp.alpha * td
    return float(table.values[s, a])


def reward_bounds_init(rewards: np.ndarray, gamma: float) -> tuple[float, float]:
    """Interval [r_min / (1 - gamma), r_max / (1 - gamma)] used to rescale Q initialisation."""
    return float(rewards.min()) / (1 - gamma), float(rewards.max()) / (1 - gamma)


class TabularAgent:
    """Epsilon-greedy Q-learner over encoded memory states."""

    def __init__(self, n_agents: int, n_actions: int, hp: AgentHyperparams,
                 rng: np.random.Generator, table: QTable | None = None,
                 learns: bool = True, explores: bool = True):
        self.hp = hp
        self.n_agents = n_agents
        self.n_actions = n_actions
        self.rng = rng
        self.learns = learns
        self.explores = explores
        size = n_states(n_actions, n_agents, hp.memory_len)
        self.table = table if table is not None else QTable.uniform(
            size, n_actions, hp.q_init_low, hp.q_init_high, rng)
        if self.table.values.shape != (size, n_actions):
            raise ParameterError(
                f"Q-table shape {self.table.values.shape} != {(size, n_actions)}")

    @property
    def memory_len(self) -> int:
        return self.hp.memory_len

    def observe_state(self, history) -> int:
        return encode(list(history), self.n_actions, self.hp.memory_len)

    def epsilon(self, t: int) -> float:
        return epsilon(self.hp.beta, t) if self.explores else 0.0

    def greedy(self, state: int) -> int:
        return self.table.greedy(state)

    def act(self, state: int, t: int) -> int:
        return select_action(self.table.values[state], self.epsilon(t), self.rng)

    def learn(self, state: int, joint: tuple[int, ...], reward: float, next_state: int,
              agent: int) -> bool:
        """Apply the TD update; return True when the greedy action of ``state`` changed."""
        if not self.learns:
            return False
        before = self.table.greedy(state)
        q_update(self.table, Transition(state, joint, reward, next_state), self.hp, agent)
        return self.table.greedy(state) != before


def stationary_policy(policy: np.ndarray, n_states_: int, n_actions: int) -> np.ndarray:
    """Normalise a deterministic (n_states,) or stochastic (n_states, n_actions) policy."""
    if callable(policy):
        raise UnsupportedConfigError("policies must be stationary lookup tables")
    policy = np.asarray(policy)
    if policy.ndim == 1:
        if policy.shape[0] != n_states_:
            raise ParameterError(f"policy covers {policy.shape[0]} states, expected {n_states_}")
        if np.any((policy < 0) | (policy >= n_actions)):
            raise DomainError("policy action outside the action set")
        return np.eye(n_actions)[policy.astype(int)]
    if policy.shape != (n_states_, n_actions):
        raise ParameterError(f"policy shape {policy.shape} != {(n_states_, n_actions)}")
    if not np.allclose(policy.sum(axis=1), 1.0):
        raise ParameterError("stochastic policy rows must sum to one")
    return policy


def policy_value_oracle(payoffs: np.ndarray, n_actions: int, policies: Sequence[np.ndarray],
                        gamma: float, tol: float = 1e-10, memory_len: int = 1,
                        max_iter: int = 1_000_000) -> np.ndarray:
    """State values of fixed joint behaviour by iterative policy evaluation.

    ``payoffs`` has shape (n_actions**K, K) indexed by joint action; states are
    memories of the last ``memory_len`` joint actions. Returns an array of shape
    (n_states, K) holding every agent's value of every state.
    """
    n_agents = payoffs.shape[1]
    size = n_states(n_actions, n_agents, memory_len)
    if size > 10_000:
        raise UnsupportedConfigError(f"state space of {size} is too large to enumerate")
    if len(policies) != n_agents:
        raise ParameterError(f"need {n_agents} policies, got {len(policies)}")
    probs = [stationary_policy(p, size, n_actions) for p in policies]
    nj = n_joint(n_actions, n_agents)

    # joint-action distribution per state and the successor of each (state, joint)
    joint_prob = np.ones((size, nj))
    for j in range(nj):
        acts = [(j // n_actions ** k) % n_actions for k in range(n_agents)]
        for k, a in enumerate(acts):
            joint_prob[:, j] *= probs[k][:, a]
    succ = (np.arange(size)[:, None] % nj ** (memory_len - 1)) * nj + np.arange(nj)[None, :]
    expected_reward = joint_prob @ payoffs

    v = np.zeros((size, n_agents))
    stop = tol * (1 - gamma) / gamma if gamma > 0 else np.inf
    for _ in range(max_iter):
        new = expected_reward + gamma * np.einsum("sj,sjk->sk", joint_prob, v[succ])
        delta = np.abs(new - v).max()
        v = new
        if delta <= stop:
            return v
    raise NumericalError(f"policy evaluation did not reach tolerance {tol} in {max_iter} sweeps")


def policy_table(policy: np.ndarray, n_actions: int) -> QTable:
    """Frozen Q-table whose greedy policy is ``policy`` (one-hot values)."""
    policy = np.asarray(policy, dtype=int)
    if np.any((policy < 0) | (policy >= n_actions)):
        raise DomainError("policy action outside the action set")
    return QTable(np.eye(n_actions)[policy])


def uniform_opponent_init(payoffs: np.ndarray, n_actions: int, agent: int, gamma: float,
                          n_states_: int) -> QTable:
    """Each action valued at its payoff against uniformly random rivals, discounted forever."""
    own = np.array([(j // n_actions ** agent) % n_actions for j in range(payoffs.shape[0])])
    mean = np.array([payoffs[own == a, agent].mean() for a in range(n_actions)])
    return QTable(np.tile(mean / (1 - gamma), (n_states_, 1)))


class FixedAgent:
    """Always plays the same action; never learns."""

    learns = False
    explores = False

    def __init__(self, action: int, memory_len: int = 1):
        self.action = int(action)
        self.memory_len = memory_len

    def observe_state(self, history) -> None:
        return None

    def epsilon(self, t: int) -> float:
        return 0.0

    def greedy(self, state) -> int:
        return self.action

    def act(self, state, t: int) -> int:
        return self.action

    def learn(self, *args, **kwargs) -> bool:
        return False
