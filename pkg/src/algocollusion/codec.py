"""Game states built from the memory of the last L joint actions.

A joint action (a_0, ..., a_{K-1}) maps to sum_k a_k * n**k. A history of L
joint actions, most recent first, maps to sum_l j_l * (n**K)**l, so the most
recent joint action occupies the lowest digits.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, WarmupError
from .market import PriceGrid


def n_joint(n_actions: int, n_agents: int) -> int:
    return n_actions ** n_agents


def n_states(n_actions: int, n_agents: int, memory_len: int) -> int:
    return n_actions ** (n_agents * memory_len)


def joint_index(actions: Sequence[int], n_actions: int) -> int:
    idx = 0
    for k, a in enumerate(actions):
        if not 0 <= a < n_actions:
            raise DomainError(f"action {a} of agent {k} outside [0, {n_actions})")
        idx += int(a) * n_actions ** k
    return idx


def joint_actions(index: int, n_actions: int, n_agents: int) -> tuple[int, ...]:
    out = []
    for _ in range(n_agents):
        index, a = divmod(index, n_actions)
        out.append(a)
    return tuple(out)


def encode(history: Sequence[Sequence[int]], n_actions: int, memory_len: int | None = None) -> int:
    """Encode ``history`` (most recent joint action first) to a state index."""
    memory_len = len(history) if memory_len is None else memory_len
    if len(history) < memory_len or memory_len < 1:
        raise WarmupError(f"history has {len(history)} joint actions, need {memory_len}")
    n_agents = len(history[0])
    base = n_joint(n_actions, n_agents)
    state = 0
    for joint in reversed(history[:memory_len]):
        state = state * base + joint_index(joint, n_actions)
    return state


def decode(state: int, n_actions: int, n_agents: int, memory_len: int) -> list[tuple[int, ...]]:
    if not 0 <= state < n_states(n_actions, n_agents, memory_len):
        raise DomainError(f"state {state} outside the state space")
    base = n_joint(n_actions, n_agents)
    history = []
    for _ in range(memory_len):
        state, j = divmod(state, base)
        history.append(joint_actions(j, n_actions, n_agents))
    return history


def next_state(state: int, joint: int, n_joint_actions: int, memory_len: int) -> int:
    """Push a new joint action into an encoded state, dropping the oldest."""
    return (state % n_joint_actions ** (memory_len - 1)) * n_joint_actions + joint


def to_features(history: Sequence[Sequence[int]], grid: PriceGrid,
                memory_len: int | None = None) -> np.ndarray:
    """Prices of the last L joint actions scaled to [0, 1], most recent first."""
    memory_len = len(history) if memory_len is None else memory_len
    if len(history) < memory_len:
        raise WarmupError(f"history has {len(history)} joint actions, need {memory_len}")
    idx = np.asarray(history[:memory_len], dtype=np.intp).ravel()
    prices = grid.points[idx]
    return (prices - grid.low) / (grid.high - grid.low)


@dataclass
class MemoryState:
    """Ring of the last ``memory_len`` joint actions."""

    n_agents: int
    n_actions: int
    memory_len: int = 1
    history: deque = field(default_factory=deque)

    def push(self, joint: Sequence[int]) -> None:
        if len(joint) != self.n_agents:
            raise DomainError(f"joint action has {len(joint)} entries, expected {self.n_agents}")
        self.history.appendleft(tuple(int(a) for a in joint))
        while len(self.history) > self.memory_len:
            self.history.pop()

    @property
    def ready(self) -> bool:
        return len(self.history) >= self.memory_len

    def encode(self) -> int:
        return encode(list(self.history), self.n_actions, self.memory_len)

    def features(self, grid: PriceGrid) -> np.ndarray:
        return to_features(list(self.history), grid, self.memory_len)
