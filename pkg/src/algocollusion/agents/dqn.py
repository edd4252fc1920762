"""Deep Q-learning over price-history features and the online/offline dual-buffer variant."""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..codec import to_features
from ..errors import DomainError, ParameterError
from ..market import PriceGrid
from .nn import Batch, ValueNet, make_optimizer, net_forward, net_gradient_step
from .tabular import epsilon, select_action

log = logging.getLogger(__name__)
_warned: set[str] = set()


def _warn_once(msg: str) -> None:
    if msg not in _warned:
        _warned.add(msg)
        log.warning(msg)


@dataclass(frozen=True)
class DQNParams:
    hidden: tuple[int, ...] = (64, 64)
    lr: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 32
    replay_capacity: int = 10_000
    target_sync: int = 500
    gamma: float = 0.95
    beta: float = 1e-3
    memory_len: int = 10
    updates_per_step: int = 1
    # stored reward = (profit - reward_offset) * reward_scale; a positive affine
    # map, so greedy policies are unaffected while Q-values stay O(1)
    reward_offset: float = 0.0
    reward_scale: float = 1.0

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ParameterError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.beta <= 0:
            raise ParameterError(f"beta must be positive, got {self.beta}")
        for name in ("batch_size", "replay_capacity", "target_sync", "memory_len"):
            if getattr(self, name) < 1:
                raise ParameterError(f"{name} must be positive")
        if self.updates_per_step < 0:
            raise ParameterError("updates_per_step must be non-negative")
        if self.reward_scale <= 0:
            raise ParameterError("reward_scale must be positive")


class ReplayBuffer:
    """Fixed-capacity ring of (features, action, reward, next features)."""

    def __init__(self, capacity: int, n_features: int):
        if capacity < 1:
            raise ParameterError(f"capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.states = np.zeros((capacity, n_features))
        self.actions = np.zeros(capacity, dtype=np.intp)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, n_features))
        self.index = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, state, action: int, reward: float, next_state) -> None:
        i = self.index
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.index = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def take(self, idx: np.ndarray) -> Batch:
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx])

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        return self.take(rng.integers(self.size, size=n))


class DQNAgent:
    """Epsilon-greedy agent whose Q-function is a :class:`ValueNet` over scaled prices."""

    def __init__(self, n_agents: int, grid: PriceGrid, params: DQNParams,
                 rng: np.random.Generator, net: ValueNet | None = None):
        self.params = params
        self.grid = grid
        self.n_agents = n_agents
        self.n_actions = grid.m
        self.rng = rng
        widths = [n_agents * params.memory_len, *params.hidden, grid.m]
        self.net = net if net is not None else ValueNet.init(widths, rng)
        if self.net.widths[0] != widths[0] or self.net.widths[-1] != widths[-1]:
            raise ParameterError(f"network widths {self.net.widths} incompatible with {widths}")
        self.target = self.net.copy()
        self.optimizer = make_optimizer(params.optimizer, params.lr)
        self.replay = ReplayBuffer(params.replay_capacity, widths[0])
        self.n_updates = 0
        self.last_loss = float("nan")
        self.learns = True
        self.explores = True
        # periods already credited to the exploration clock (offline experience)
        self.clock_offset = 0

    @property
    def memory_len(self) -> int:
        return self.params.memory_len

    def observe_state(self, history) -> np.ndarray:
        return to_features(list(history), self.grid, self.params.memory_len)

    def epsilon(self, t: int) -> float:
        return epsilon(self.params.beta, t + self.clock_offset) if self.explores else 0.0

    def q_values(self, obs) -> np.ndarray:
        return net_forward(self.net, obs)

    def greedy(self, obs) -> int:
        return int(np.argmax(self.q_values(obs)))

    def act(self, obs, t: int) -> int:
        return select_action(self.q_values(obs), self.epsilon(t), self.rng)

    def scaled(self, reward: float) -> float:
        return (reward - self.params.reward_offset) * self.params.reward_scale

    def _train_on(self, batch: Batch) -> float:
        loss = net_gradient_step(self.net, batch, self.params.gamma, self.target, self.optimizer)
        self.n_updates += 1
        if self.n_updates % self.params.target_sync == 0:
            self.target.load_from(self.net)
        self.last_loss = loss
        return loss

    def _sample(self) -> Batch | None:
        if len(self.replay) < self.params.batch_size:
            return None
        return self.replay.sample(self.params.batch_size, self.rng)

    def _push(self, obs, action: int, reward: float, next_obs) -> None:
        self.replay.push(obs, action, self.scaled(reward), next_obs)

    def learn(self, obs, joint, reward: float, next_obs, agent: int) -> bool:
        """Store the transition and train; True when the greedy action at ``obs`` changed."""
        if not self.learns:
            return False
        self._push(obs, joint[agent], reward, next_obs)
        if self.params.updates_per_step == 0:
            return False
        before = self.greedy(obs)
        for _ in range(self.params.updates_per_step):
            batch = self._sample()
            if batch is None:
                return False
            self._train_on(batch)
        return self.greedy(obs) != before


@dataclass(frozen=True)
class DualBufferConfig:
    offline_capacity: int = 4000
    online_capacity: int = 400
    offline_weight: float = 0.5
    rolling_window: int = 100
    profit_threshold_frac: float = 0.9
    p_online_low: float = 0.2
    p_online_high: float = 0.9
    pretrain_updates: int = 2000
    credit_offline_steps: bool = True

    def __post_init__(self):
        if self.offline_capacity < 1 or self.online_capacity < 1:
            raise ParameterError("buffer capacities must be positive")
        if not 0 < self.offline_weight <= 1:
            raise ParameterError(f"offline_weight must lie in (0, 1], got {self.offline_weight}")
        if self.rolling_window < 1:
            raise ParameterError("rolling_window must be positive")
        if not 0 < self.profit_threshold_frac < 1:
            raise ParameterError("profit_threshold_frac must lie in (0, 1)")
        for p in (self.p_online_low, self.p_online_high):
            if not 0 <= p <= 1:
                raise ParameterError(f"sampling probabilities must lie in [0, 1], got {p}")
        if self.p_online_low > self.p_online_high:
            raise ParameterError("p_online_low must not exceed p_online_high")
        if self.pretrain_updates < 0:
            raise ParameterError("pretrain_updates must be non-negative")


def dual_buffer_sample(cfg: DualBufferConfig, p_online: float, rng: np.random.Generator,
                       online: ReplayBuffer, offline: ReplayBuffer, batch_size: int) -> Batch:
    """Draw each element from the online buffer with probability ``p_online``.

    Offline-sourced elements carry importance weight ``cfg.offline_weight``,
    online-sourced ones weight 1.
    """
    if not 0 <= p_online <= 1:
        raise DomainError(f"p_online must lie in [0, 1], got {p_online}")
    if len(online) == 0 and len(offline) == 0:
        raise DomainError("both buffers are empty")
    from_online = rng.random(batch_size) < p_online
    if len(online) == 0 and from_online.any():
        _warn_once("online buffer empty; sampling offline only")
        from_online[:] = False
    elif len(offline) == 0 and not from_online.all():
        _warn_once("offline buffer empty; sampling online only")
        from_online[:] = True
    n_on = int(from_online.sum())
    batch = Batch(np.empty((batch_size, online.states.shape[1])), np.empty(batch_size, dtype=np.intp),
                  np.empty(batch_size), np.empty((batch_size, online.states.shape[1])),
                  np.where(from_online, 1.0, cfg.offline_weight))
    for mask, buf, n in ((from_online, online, n_on), (~from_online, offline, batch_size - n_on)):
        if n:
            part = buf.sample(n, rng)
            batch.states[mask] = part.states
            batch.actions[mask] = part.actions
            batch.rewards[mask] = part.rewards
            batch.next_states[mask] = part.next_states
    return batch


@dataclass
class ControllerState:
    high: bool = False
    recovered: int = 0


def update_sampling_probability(cfg: DualBufferConfig, window, baseline: float,
                                state: ControllerState | None = None) -> tuple[float, ControllerState]:
    """Threshold controller on the rolling mean profit, with hysteresis.

    Switches to ``p_online_high`` as soon as the window mean falls below
    ``profit_threshold_frac * baseline``; switches back only after the mean has
    stayed at or above the threshold for ``rolling_window`` consecutive calls.
    """
    if baseline <= 0:
        raise ParameterError(f"baseline must be positive, got {baseline}")
    state = ControllerState() if state is None else state
    below = len(window) > 0 and float(np.mean(window)) < cfg.profit_threshold_frac * baseline
    if below:
        state.high = True
        state.recovered = 0
    elif state.high:
        state.recovered += 1
        if state.recovered >= cfg.rolling_window:
            state.high = False
            state.recovered = 0
    return (cfg.p_online_high if state.high else cfg.p_online_low), state


class DualBufferAgent(DQNAgent):
    """DQN learner mixing an offline buffer of observed market history with a
    small buffer of its own recent experience.

    Call :meth:`observe_offline` during the observation phase, then
    :meth:`finish_observation` before acting.
    """

    def __init__(self, n_agents: int, grid: PriceGrid, params: DQNParams, cfg: DualBufferConfig,
                 rng: np.random.Generator, net: ValueNet | None = None):
        super().__init__(n_agents, grid, params, rng, net)
        n_features = self.net.n_inputs
        self.cfg = cfg
        self.offline = ReplayBuffer(cfg.offline_capacity, n_features)
        self.online = ReplayBuffer(cfg.online_capacity, n_features)
        self.window: deque[float] = deque(maxlen=cfg.rolling_window)
        self.controller = ControllerState()
        self.p_online = cfg.p_online_low
        self.baseline: float | None = None
        self._offline_profits: list[float] = []

    def observe_offline(self, obs, action: int, reward: float, next_obs, profit: float) -> None:
        self.offline.push(obs, action, self.scaled(reward), next_obs)
        self._offline_profits.append(profit)

    def finish_observation(self, baseline: float | None = None) -> None:
        if baseline is None:
            if not self._offline_profits:
                raise ParameterError("no offline observations to derive a profit baseline")
            baseline = float(np.mean(self._offline_profits[-self.cfg.offline_capacity:]))
        self.baseline = baseline
        if self.cfg.credit_offline_steps:
            self.clock_offset = len(self._offline_profits)
        if len(self.offline):
            for _ in range(self.cfg.pretrain_updates):
                self._train_on(self.offline.sample(self.params.batch_size, self.rng))

    def record_profit(self, profit: float) -> float:
        self.window.append(profit)
        if self.baseline is not None and self.baseline > 0:
            self.p_online, self.controller = update_sampling_probability(
                self.cfg, self.window, self.baseline, self.controller)
        return self.p_online

    def _push(self, obs, action: int, reward: float, next_obs) -> None:
        self.online.push(obs, action, self.scaled(reward), next_obs)

    def _sample(self) -> Batch | None:
        if len(self.offline) == 0:
            # no observation phase: behave as a plain learner on the online buffer
            if len(self.online) < self.params.batch_size:
                return None
            return self.online.sample(self.params.batch_size, self.rng)
        return dual_buffer_sample(self.cfg, self.p_online, self.rng, self.online,
                                  self.offline, self.params.batch_size)

    def learn(self, obs, joint, reward: float, next_obs, agent: int, profit: float | None = None) -> bool:
        self.record_profit(reward if profit is None else profit)
        return super().learn(obs, joint, reward, next_obs, agent)
