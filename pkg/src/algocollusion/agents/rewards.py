"""Multi-objective reward: own profit plus a weighted share of rivals' profits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DomainError, ParameterError


@dataclass(frozen=True)
class RewardSpec:
    # 0 is the selfish (adversarial) objective; > 0 rewards rival profit too
    opponent_weight: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.opponent_weight) and self.opponent_weight >= 0):
            raise ParameterError(f"opponent_weight must be >= 0, got {self.opponent_weight}")


def shape_reward(spec: RewardSpec, own: float, others: Sequence[float]) -> float:
    total = float(sum(others))
    if not (math.isfinite(own) and math.isfinite(total)):
        raise DomainError("rewards must be finite")
    return own + spec.opponent_weight * total


def shaped_table(raw: np.ndarray, weights: Sequence[float]) -> np.ndarray:
    """Apply per-agent opponent weights to a (n_joint, K) payoff table."""
    raw = np.asarray(raw, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.shape != (raw.shape[1],):
        raise ParameterError(f"need {raw.shape[1]} weights, got {w.shape}")
    others = raw.sum(axis=1, keepdims=True) - raw
    return raw + w[None, :] * others
