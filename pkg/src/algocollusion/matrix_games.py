"""Iterated two-player normal-form games (prisoner's dilemma)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

COOPERATE, DEFECT = 0, 1


@dataclass(frozen=True)
class PayoffMatrix:
    rho_t: float = 0.0
    rho_c: float = -1.0
    rho_d: float = -2.0
    rho_l: float = -3.0

    def __post_init__(self):
        if not (self.rho_t > self.rho_c > self.rho_d > self.rho_l):
            raise ParameterError(
                "prisoner's dilemma needs rho_t > rho_c > rho_d > rho_l, got "
                f"{(self.rho_t, self.rho_c, self.rho_d, self.rho_l)}")

    @property
    def nash_reward(self) -> float:
        return self.rho_d

    @property
    def pareto_reward(self) -> float:
        return self.rho_c


def _check_action(a: int) -> None:
    if a not in (COOPERATE, DEFECT):
        raise DomainError(f"action must be 0 (cooperate) or 1 (defect), got {a!r}")


def pd_payoff(matrix: PayoffMatrix, action_i: int, action_j: int) -> tuple[float, float]:
    _check_action(action_i)
    _check_action(action_j)
    if action_i == action_j:
        r = matrix.rho_c if action_i == COOPERATE else matrix.rho_d
        return r, r
    if action_i == DEFECT:
        return matrix.rho_t, matrix.rho_l
    return matrix.rho_l, matrix.rho_t


@dataclass(frozen=True)
class MatrixGameState:
    last_actions: tuple[int, ...] = (COOPERATE, COOPERATE)

    def __post_init__(self):
        for a in self.last_actions:
            _check_action(a)


def step(matrix: PayoffMatrix, state: MatrixGameState,
         actions: tuple[int, int]) -> tuple[MatrixGameState, tuple[float, float]]:
    """Play one round; the next state is the joint action just played (memory 1)."""
    rewards = pd_payoff(matrix, *actions)
    return MatrixGameState(tuple(actions)), rewards


def pd_payoff_table(matrix: PayoffMatrix) -> np.ndarray:
    """Rewards for each joint action index a_0 + 2 * a_1, shape (4, 2)."""
    table = np.empty((4, 2))
    for a1 in (0, 1):
        for a0 in (0, 1):
            table[a0 + 2 * a1] = pd_payoff(matrix, a0, a1)
    return table
