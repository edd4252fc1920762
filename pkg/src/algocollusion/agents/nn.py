"""Small feed-forward Q-network in numpy with hand-written backpropagation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, NumericalError, ParameterError


@dataclass
class ValueNet:
    """ReLU hidden layers, identity output. ``weights[l]`` has shape (in, out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, widths, rng: np.random.Generator) -> "ValueNet":
        widths = [int(w) for w in widths]
        if len(widths) < 2 or min(widths) < 1:
            raise ParameterError(f"need at least input and output widths, got {widths}")
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_outputs(self) -> int:
        return self.weights[-1].shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> "ValueNet":
        return ValueNet([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def load_from(self, other: "ValueNet") -> None:
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src


def _as_batch(net: ValueNet, features) -> tuple[np.ndarray, bool]:
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != net.n_inputs:
        raise DomainError(f"feature width {x.shape[1]} != network input width {net.n_inputs}")
    return x, single


def forward_cache(net: ValueNet, x: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer, input first and output last."""
    acts = [x]
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = acts[-1] @ w + b
        acts.append(z if i == last else np.maximum(z, 0.0))
    return acts


def net_forward(net: ValueNet, features) -> np.ndarray:
    x, single = _as_batch(net, features)
    out = forward_cache(net, x)[-1]
    return out[0] if single else out


def backward(net: ValueNet, acts: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
    """Gradients in the order of :meth:`ValueNet.parameters`."""
    grads: list[np.ndarray] = []
    delta = grad_out
    for i in range(len(net.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(acts[i].T @ delta)
        if i > 0:
            # ReLU derivative taken from the post-activation (zero where clipped)
            delta = (delta @ net.weights[i].T) * (acts[i] > 0)
    grads.reverse()
    return grads


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.weights is None:
            self.weights = np.ones(len(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    @classmethod
    def from_transitions(cls, transitions, agent: int = 0) -> "Batch":
        return cls(
            states=np.array([t.state for t in transitions], dtype=float),
            actions=np.array([t.joint_actions[agent] for t in transitions], dtype=np.intp),
            rewards=np.array([t.reward for t in transitions], dtype=float),
            next_states=np.array([t.next_state for t in transitions], dtype=float),
        )


def td_targets(target_net: ValueNet, batch: Batch, gamma: float) -> np.ndarray:
    return batch.rewards + gamma * net_forward(target_net, batch.next_states).max(axis=1)


def td_loss_and_grads(net: ValueNet, batch: Batch, targets: np.ndarray):
    """Weighted mean squared TD error and its gradient.

    loss = mean_i w_i (q(s_i, a_i) - y_i)^2
    """
    x, _ = _as_batch(net, batch.states)
    acts = forward_cache(net, x)
    rows = np.arange(len(batch))
    err = acts[-1][rows, batch.actions] - targets
    loss = float(np.mean(batch.weights * err ** 2))
    grad_out = np.zeros_like(acts[-1])
    grad_out[rows, batch.actions] = 2.0 * batch.weights * err / len(batch)
    return loss, backward(net, acts, grad_out)


def td_loss(net: ValueNet, batch: Batch, targets: np.ndarray) -> float:
    q = net_forward(net, batch.states)[np.arange(len(batch)), batch.actions]
    return float(np.mean(batch.weights * (q - targets) ** 2))


@dataclass
class SGD:
    lr: float = 1e-3

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.lr * g


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(name: str, lr: float):
    if name == "adam":
        return Adam(lr=lr)
    if name == "sgd":
        return SGD(lr=lr)
    raise ParameterError(f"unknown optimizer {name!r}")


def net_gradient_step(net: ValueNet, batch: Batch, gamma: float, target_net: ValueNet,
                      optimizer) -> float:
    """One optimiser step on the TD loss; returns the loss before the update."""
    if len(batch) == 0:
        raise DomainError("empty batch")
    targets = td_targets(target_net, batch, gamma)
    loss, grads = td_loss_and_grads(net, batch, targets)
    if not math.isfinite(loss):
        raise NumericalError(f"non-finite TD loss {loss}")
    optimizer.step(net.parameters(), grads)
    return loss
