"""Logit-demand Bertrand market, symmetric equilibrium prices and the price grid.

Demand for firm i is

    q_i = exp((a_i - p_i) / mu) / (sum_j exp((a_j - p_j) / mu) + exp(a0 / mu))

and profit is (p_i - c_i) * q_i. Exponents are shifted by their maximum before
exponentiation so large quality indexes or small ``mu`` do not overflow.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NumericalError, ParameterError, UnsupportedConfigError

FOC_TOL = 1e-10
DAMPING = 0.5
MAX_FIXED_POINT_ITER = 10_000


@dataclass(frozen=True)
class MarketParams:
    n_agents: int = 2
    mu: float = 0.25
    a0: float = 0.0
    quality: tuple[float, ...] = (2.0, 2.0)
    marginal_cost: tuple[float, ...] = (1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "quality", tuple(float(x) for x in self.quality))
        object.__setattr__(self, "marginal_cost", tuple(float(x) for x in self.marginal_cost))
        self.validate()

    @classmethod
    def symmetric(cls, n_agents: int = 2, mu: float = 0.25, a0: float = 0.0,
                  quality: float = 2.0, marginal_cost: float = 1.0) -> "MarketParams":
        return cls(n_agents, mu, a0, (quality,) * n_agents, (marginal_cost,) * n_agents)

    def validate(self) -> None:
        if not isinstance(self.n_agents, (int, np.integer)) or self.n_agents < 1:
            raise ParameterError(f"n_agents must be a positive integer, got {self.n_agents!r}")
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ParameterError(f"mu must be positive, got {self.mu!r}")
        if not math.isfinite(self.a0):
            raise ParameterError(f"a0 must be finite, got {self.a0!r}")
        for name in ("quality", "marginal_cost"):
            values = getattr(self, name)
            if len(values) != self.n_agents:
                raise ParameterError(
                    f"{name} has length {len(values)}, expected n_agents={self.n_agents}")
            if not all(math.isfinite(v) for v in values):
                raise ParameterError(f"{name} must be finite, got {values!r}")
        if any(c <= 0 for c in self.marginal_cost):
            raise ParameterError(f"marginal_cost must be positive, got {self.marginal_cost!r}")

    @property
    def is_symmetric(self) -> bool:
        return len(set(self.quality)) == 1 and len(set(self.marginal_cost)) == 1


@dataclass(frozen=True)
class MarketOutcome:
    prices: np.ndarray
    shares: np.ndarray
    outside_share: float
    profits: np.ndarray


@dataclass(frozen=True)
class PriceGrid:
    points: np.ndarray
    xi: float
    p_nash: float
    p_monopoly: float
    m: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "m", len(self.points))

    @property
    def low(self) -> float:
        return float(self.points[0])

    @property
    def high(self) -> float:
        return float(self.points[-1])

    @property
    def step(self) -> float:
        return float(self.points[1] - self.points[0])

    def price(self, index: int) -> float:
        if not 0 <= index < self.m:
            raise DomainError(f"price index {index} outside [0, {self.m})")
        return float(self.points[index])

    def index_above(self, price: float) -> int:
        """Smallest grid index whose price is strictly greater than ``price``."""
        above = np.flatnonzero(self.points > price)
        if above.size == 0:
            raise DomainError(f"no grid point above {price}")
        return int(above[0])

    def nearest(self, price: float) -> int:
        return int(np.argmin(np.abs(self.points - price)))


def _exponents(params: MarketParams, prices: np.ndarray) -> tuple[np.ndarray, float]:
    a = np.asarray(params.quality)
    return (a - prices) / params.mu, params.a0 / params.mu


def _check_prices(params: MarketParams, prices) -> np.ndarray:
    params.validate()
    p = np.asarray(prices, dtype=float)
    if p.shape != (params.n_agents,):
        raise ParameterError(f"expected {params.n_agents} prices, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError(f"prices must be finite, got {p}")
    if np.any(p <= 0):
        raise DomainError(f"prices must be positive, got {p}")
    return p


def demand(params: MarketParams, prices, shift: bool = True) -> MarketOutcome:
    """Market shares and profits at ``prices``.

    ``shift=False`` evaluates the textbook formula directly; it exists only so
    the stabilised path can be checked against it.
    """
    p = _check_prices(params, prices)
    x, x0 = _exponents(params, p)
    m = max(x.max(), x0) if shift else 0.0
    e = np.exp(x - m)
    e0 = math.exp(x0 - m)
    denom = e.sum() + e0
    shares = e / denom
    profits = (p - np.asarray(params.marginal_cost)) * shares
    return MarketOutcome(prices=p, shares=shares, outside_share=e0 / denom, profits=profits)


def symmetric_share(params: MarketParams, price: float) -> float:
    """Share of each firm when all K firms charge ``price``."""
    k = params.n_agents
    x = (params.quality[0] - price) / params.mu
    x0 = params.a0 / params.mu
    m = max(x, x0)
    e = math.exp(x - m)
    return e / (k * e + math.exp(x0 - m))


def _require_symmetric(params: MarketParams) -> None:
    params.validate()
    if not params.is_symmetric:
        raise UnsupportedConfigError(
            "equilibrium solver only handles symmetric quality and marginal cost")


def monopoly_foc(params: MarketParams, price: float) -> float:
    """Scaled derivative of joint profit at a common price; zero at the optimum.

    d/dp [K (p - c) q(p)] = K q [1 - (p - c)(1 - K q) / mu].
    """
    c = params.marginal_cost[0]
    q = symmetric_share(params, price)
    return 1.0 - (price - c) * (1.0 - params.n_agents * q) / params.mu


def monopoly_price(params: MarketParams, tol: float = FOC_TOL) -> float:
    """Common price maximising joint profit, by bisection on the first-order condition."""
    _require_symmetric(params)
    c = params.marginal_cost[0]
    lo, hi = c, c + 10.0 * params.mu
    # foc(c) = 1 > 0; widen until the sign flips
    for _ in range(64):
        if monopoly_foc(params, hi) < 0:
            break
        hi = c + 2.0 * (hi - c)
    else:
        raise NumericalError(f"could not bracket monopoly price: foc({hi}) >= 0")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if monopoly_foc(params, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def nash_best_response_map(params: MarketParams, price: float) -> float:
    """Own-price first-order condition p = c + mu / (1 - q_i) evaluated at a common price."""
    c = params.marginal_cost[0]
    q = symmetric_share(params, price)
    return c + params.mu / (1.0 - q)


def nash_price(params: MarketParams, damping: float = DAMPING, tol: float = FOC_TOL,
               max_iter: int = MAX_FIXED_POINT_ITER) -> float:
    """Symmetric Bertrand-Nash price via damped fixed-point iteration."""
    _require_symmetric(params)
    p = params.marginal_cost[0] + params.mu
    for _ in range(max_iter):
        new = (1.0 - damping) * p + damping * nash_best_response_map(params, p)
        if not math.isfinite(new):
            raise NumericalError(f"fixed-point iterate became non-finite from p={p}")
        if abs(new - p) < tol:
            return new
        p = new
    raise NumericalError(f"Nash fixed point did not converge in {max_iter} iterations (p={p})")


def build_grid(p_nash: float, p_monopoly: float, xi: float = 0.1, m: int = 15) -> PriceGrid:
    if not p_monopoly > p_nash:
        raise ParameterError(f"p_monopoly ({p_monopoly}) must exceed p_nash ({p_nash})")
    if m < 2:
        raise ParameterError(f"grid size m must be >= 2, got {m}")
    if xi < 0:
        raise ParameterError(f"xi must be non-negative, got {xi}")
    span = p_monopoly - p_nash
    points = np.linspace(p_nash - xi * span, p_monopoly + xi * span, m)
    return PriceGrid(points=points, xi=float(xi), p_nash=float(p_nash), p_monopoly=float(p_monopoly))


def grid_for(params: MarketParams, xi: float = 0.1, m: int = 15) -> PriceGrid:
    return build_grid(nash_price(params), monopoly_price(params), xi, m)


def benchmark_profits(params: MarketParams) -> tuple[float, float]:
    """Per-firm one-period profit at the symmetric Nash and monopoly prices."""
    _require_symmetric(params)
    k = params.n_agents
    pn = demand(params, [nash_price(params)] * k).profits[0]
    pm = demand(params, [monopoly_price(params)] * k).profits[0]
    return float(pn), float(pm)


def payoff_table(params: MarketParams, grid: PriceGrid) -> np.ndarray:
    """Profits for every joint action, shape (m**K, K).

    Row index is the mixed-radix joint action sum_k a_k * m**k (agent 0 in the
    lowest digit), matching :func:`algocollusion.codec.joint_index`.
    """
    k, m = params.n_agents, grid.m
    table = np.empty((m ** k, k))
    for idx, combo in enumerate(itertools.product(range(m), repeat=k)):
        # itertools.product varies the last position fastest; reverse for agent 0 lowest
        actions = combo[::-1]
        table[idx] = demand(params, grid.points[list(actions)]).profits
    return table
