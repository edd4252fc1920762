"""Monte-Carlo runner: builds games and agents from a config and plays them.

Replica ``r`` of a config with master seed ``s`` draws all of its randomness
from ``SeedSequence(s).spawn(n_monte_carlo)[r]``, which is split again into one
stream for the initial history plus one per agent. Records are therefore a pure
function of (config, seed).

Games in which every agent is tabular or fixed run through the compiled kernel;
anything involving a neural agent runs period by period in Python.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..agents.dqn import DQNAgent, DQNParams, DualBufferAgent
from ..agents.rewards import shaped_table
from ..agents.snapshot import load as load_snapshot
from ..agents.tabular import (AgentHyperparams, FixedAgent, QTable, TabularAgent,
                              reward_bounds_init, uniform_opponent_init)
from ..codec import encode, n_joint, n_states
from ..errors import ConfigError, NumericalError
from ..market import MarketParams, benchmark_profits, grid_for, payoff_table
from ..matrix_games import PayoffMatrix, pd_payoff_table
from .config import AgentSpec, ExperimentConfig, Intervention, dual_config, n_actions_of, validate
from .kernel import NO_FORCE, greedy_cycle, tabular_chunk

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- game

@dataclass
class Game:
    kind: str
    n_agents: int
    n_actions: int
    payoffs: np.ndarray          # (n_actions**K, K), joint index sum a_k n^k
    grid: object = None          # PriceGrid for markets
    params: MarketParams | None = None
    nash_reward: float = 0.0
    coop_reward: float = 0.0

    @property
    def n_joint(self) -> int:
        return self.payoffs.shape[0]

    def prices(self, actions: np.ndarray) -> np.ndarray | None:
        if self.grid is None:
            return None
        return self.grid.points[actions]

    def joint(self, actions) -> int:
        j, mult = 0, 1
        for a in actions:
            j += int(a) * mult
            mult *= self.n_actions
        return j


def build_game(cfg: ExperimentConfig) -> Game:
    env = cfg.environment
    if env.kind == "market":
        mk = env.market
        params = MarketParams.symmetric(mk.n_agents, mk.mu, mk.a0, mk.quality, mk.marginal_cost)
        grid = grid_for(params, mk.xi, mk.m)
        pi_n, pi_m = benchmark_profits(params)
        return Game("market", mk.n_agents, mk.m, payoff_table(params, grid), grid, params, pi_n, pi_m)
    mx = env.matrix
    matrix = PayoffMatrix(mx.rho_t, mx.rho_c, mx.rho_d, mx.rho_l)
    return Game("matrix_game", 2, 2, pd_payoff_table(matrix), None, None,
                matrix.nash_reward, matrix.pareto_reward)


def resolve_action(game: Game, value, loc: str, previous: int | None = None) -> int:
    if isinstance(value, (int, np.integer)):
        return int(value)
    if value == "lowest":
        return 0
    if value == "highest":
        return game.n_actions - 1
    if value == "above_nash":
        if game.grid is None:
            raise ConfigError("'above_nash' needs a market environment", loc)
        return game.grid.index_above(game.grid.p_nash)
    if value == "hold":
        if previous is None:
            raise ConfigError("'hold' needs a previous period", loc)
        return int(previous)
    raise ConfigError(f"unknown action reference {value!r}", loc)


# ---------------------------------------------------------------- agents

def _q_init(spec: AgentSpec, game: Game, agent: int, size: int, rng) -> QTable:
    mode = spec.q_init
    if mode == "auto":
        mode = "reward_bounds" if game.kind == "market" else "uniform"
    if mode == "uniform_opponent":
        return uniform_opponent_init(game.payoffs, game.n_actions, agent, spec.gamma, size)
    table = QTable.uniform(size, game.n_actions, spec.q_init_low, spec.q_init_high, rng)
    if mode == "reward_bounds":
        lo, hi = reward_bounds_init(game.payoffs[:, agent], spec.gamma)
        span = spec.q_init_high - spec.q_init_low
        unit = (table.values - spec.q_init_low) / span if span > 0 else np.full_like(table.values, 0.5)
        table.values[...] = lo + unit * (hi - lo)
    return table


def dqn_params(spec: AgentSpec, game: Game) -> DQNParams:
    d = spec.dqn
    offset, scale = 0.0, 1.0
    if d.normalize_rewards and game.coop_reward != game.nash_reward:
        offset = game.nash_reward
        scale = (1 - spec.gamma) / (game.coop_reward - game.nash_reward)
    return DQNParams(hidden=tuple(d.hidden), lr=d.lr, optimizer=d.optimizer, batch_size=d.batch_size,
                     replay_capacity=d.replay_capacity, target_sync=d.target_sync, gamma=spec.gamma,
                     beta=spec.beta, memory_len=spec.memory_len, updates_per_step=d.updates_per_step,
                     reward_offset=offset, reward_scale=scale)


def build_agent(spec: AgentSpec, game: Game, index: int, rng: np.random.Generator):
    loc = f"agents[{index}]"
    if spec.kind == "fixed":
        return FixedAgent(resolve_action(game, spec.action, f"{loc}.action"))
    if spec.kind == "tabular":
        hp = AgentHyperparams(spec.alpha, spec.gamma, spec.beta, spec.q_init_low,
                              spec.q_init_high, spec.memory_len)
        size = n_states(game.n_actions, game.n_agents, spec.memory_len)
        if spec.snapshot is not None:
            table = load_snapshot(spec.snapshot)
            if not isinstance(table, QTable) or table.values.shape != (size, game.n_actions):
                raise ConfigError(f"snapshot does not hold a ({size}, {game.n_actions}) Q-table",
                                  f"{loc}.snapshot")
        else:
            table = _q_init(spec, game, index, size, rng)
        return TabularAgent(game.n_agents, game.n_actions, hp, rng, table,
                            learns=spec.learns, explores=spec.explores)
    params = dqn_params(spec, game)
    if spec.kind == "dqn":
        agent = DQNAgent(game.n_agents, game.grid, params, rng)
    else:
        agent = DualBufferAgent(game.n_agents, game.grid, params, dual_config(spec.dual), rng)
    if spec.snapshot is not None:
        net = load_snapshot(spec.snapshot)
        if not hasattr(net, "weights") or net.widths != agent.net.widths:
            raise ConfigError("snapshot does not match the network shape", f"{loc}.snapshot")
        agent.net.load_from(net)
        agent.target.load_from(net)
    agent.learns, agent.explores = spec.learns, spec.explores
    return agent


def replica_streams(seed: int, n_replicas: int, n_agents: int) -> list[list[np.random.Generator]]:
    """Per replica: [history stream, agent 0 stream, agent 1 stream, ...]."""
    out = []
    for child in np.random.SeedSequence(seed).spawn(n_replicas):
        out.append([np.random.default_rng(s) for s in child.spawn(n_agents + 1)])
    return out


# ---------------------------------------------------------------- interventions

@dataclass(frozen=True)
class Override:
    agent: int
    start: int
    end: float        # exclusive; inf when permanent
    action: int | str

    def active(self, t: int) -> bool:
        return self.start <= t < self.end


def schedule_for(cfg: ExperimentConfig, game: Game, anchor: str, offset: int,
                 horizon_end: int) -> list[Override]:
    """Absolute-period overrides for interventions with the given anchor."""
    out = []
    for i, iv in enumerate(cfg.interventions):
        if iv.anchor != anchor:
            continue
        loc = f"interventions[{i}]"
        if iv.price is not None:
            action: int | str = game.grid.nearest(iv.price)
        elif iv.action == "hold":
            action = "hold"
        else:
            action = resolve_action(game, iv.action, f"{loc}.action")
        end = math.inf if iv.permanent else offset + iv.end
        out.append(Override(iv.agent, offset + iv.start, min(end, horizon_end) if anchor == "start" else end, action))
    check_schedule(out)
    return out


def check_schedule(schedule: Iterable[Override]) -> None:
    items = list(schedule)
    for i, a in enumerate(items):
        for b in items[i + 1:]:
            if a.agent == b.agent and a.start < b.end and b.start < a.end and a.action != b.action:
                raise ConfigError(f"conflicting overrides for agent {a.agent} in periods "
                                  f"[{max(a.start, b.start)}, {min(a.end, b.end)})", "interventions")


def apply_interventions(schedule: Iterable[Override], period: int, proposed,
                        previous=None) -> tuple[int, ...]:
    """Replace proposed actions by forced ones active at ``period``.

    ``previous`` is the effective joint action of the period before the
    override began; it resolves "hold" overrides.
    """
    effective = [int(a) for a in proposed]
    for ov in schedule:
        if ov.active(period):
            if ov.action == "hold":
                if previous is None:
                    raise ConfigError("'hold' override without a previous period", "interventions")
                effective[ov.agent] = int(previous[ov.agent])
            else:
                effective[ov.agent] = int(ov.action)
    return tuple(effective)


# ---------------------------------------------------------------- convergence

class ConvergenceTracker:
    """Counts consecutive periods without any greedy-policy change."""

    def __init__(self, stability: int):
        self.stability = stability
        self.stable = 0
        self.elapsed = 0
        self.converged_at: int | None = None

    def update(self, changed: bool) -> bool:
        self.elapsed += 1
        self.stable = 0 if changed else self.stable + 1
        if self.converged_at is None and self.stable >= self.stability:
            self.converged_at = self.elapsed
        return self.converged_at is not None


def detect_convergence(changes: Iterable[bool], rule) -> int | None:
    """Number of periods elapsed when ``rule.stability`` consecutive unchanged periods accrue."""
    if rule.stability < 1:
        raise ConfigError("stability must be at least 1", "convergence.stability")
    tracker = ConvergenceTracker(rule.stability)
    for changed in changes:
        if tracker.update(bool(changed)):
            return tracker.converged_at
    return None


# ---------------------------------------------------------------- records

@dataclass
class RunRecord:
    replica: int
    periods: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    epsilons: np.ndarray
    p_online: np.ndarray
    prices: np.ndarray | None = None
    n_periods: int = 0
    converged_at: int | None = None
    anchor_period: int | None = None
    greedy: list | None = None
    final_state: int | None = None
    cycle_actions: np.ndarray | None = None
    cycle_profits: np.ndarray | None = None
    tables: list | None = None          # final Q-values of tabular agents (None for others)
    markers: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.periods)


class Recorder:
    """Keeps every ``stride``-th period, optionally only the last ``tail`` of them."""

    def __init__(self, n_agents: int, stride: int, tail: int | None):
        self.k = n_agents
        self.stride = stride
        self.tail = tail
        self.chunks: deque = deque()
        self.size = 0

    def add(self, periods, actions, rewards, epsilons, p_online) -> None:
        periods = np.asarray(periods, dtype=np.int64)
        keep = periods % self.stride == 0
        if not keep.any():
            return
        part = (periods[keep], np.asarray(actions)[keep].astype(np.int64),
                np.asarray(rewards, dtype=float)[keep], np.asarray(epsilons, dtype=float)[keep],
                np.asarray(p_online, dtype=float)[keep])
        self.chunks.append(part)
        self.size += len(part[0])
        if self.tail is not None:
            while self.chunks and self.size - len(self.chunks[0][0]) >= self.tail:
                self.size -= len(self.chunks.popleft()[0])

    def arrays(self):
        if not self.chunks:
            k = self.k
            return (np.zeros(0, np.int64), np.zeros((0, k), np.int64), np.zeros((0, k)),
                    np.zeros((0, k)), np.zeros((0, k)))
        cols = [np.concatenate([c[i] for c in self.chunks]) for i in range(5)]
        if self.tail is not None:
            cols = [c[-self.tail:] for c in cols]
        return tuple(cols)

    def record(self, replica: int, game: Game, **extra) -> RunRecord:
        periods, actions, rewards, eps, p_on = self.arrays()
        return RunRecord(replica, periods, actions, rewards, eps, p_on,
                         prices=game.prices(actions), **extra)


# ---------------------------------------------------------------- kernel path

def kernel_eligible(cfg: ExperimentConfig) -> bool:
    kinds = {a.kind for a in cfg.agents}
    if not kinds <= {"tabular", "fixed"}:
        return False
    lens = {a.memory_len for a in cfg.agents if a.kind == "tabular"}
    return len(lens) <= 1


def _boundaries(start: int, stop: int, chunk: int, schedule: list[Override]) -> list[int]:
    cuts = set(range(start, stop, chunk)) | {stop}
    for ov in schedule:
        for b in (ov.start, ov.end):
            if start < b < stop:
                cuts.add(int(b))
    return sorted(c for c in cuts if c >= start)


class KernelGame:
    """Array state shared by the compiled kernel for one replica."""

    def __init__(self, cfg: ExperimentConfig, game: Game, agents, history_rng):
        k = game.n_agents
        self.cfg, self.game, self.agents = cfg, game, agents
        self.memory_len = max([a.memory_len for a in cfg.agents if a.kind == "tabular"] or [1])
        nj = game.n_joint
        self.n_states = nj ** self.memory_len
        self.keep_mod = nj ** (self.memory_len - 1)
        n = game.n_actions
        self.q = np.zeros((k, self.n_states, n))
        self.fixed = np.full(k, NO_FORCE, dtype=np.int64)
        for i, ag in enumerate(agents):
            if isinstance(ag, FixedAgent):
                self.fixed[i] = ag.action
            else:
                self.q[i] = ag.table.values
        self.greedy = np.argmax(self.q, axis=2).astype(np.int64)
        for i in np.nonzero(self.fixed >= 0)[0]:
            self.greedy[i, :] = self.fixed[i]
        self.alpha = np.array([getattr(a, "hp", None).alpha if isinstance(a, TabularAgent) else 0.0
                               for a in agents])
        self.gamma = np.array([a.hp.gamma if isinstance(a, TabularAgent) else 0.0 for a in agents])
        self.beta = np.array([a.hp.beta if isinstance(a, TabularAgent) else 1.0 for a in agents])
        self.learns = np.array([bool(a.learns) for a in agents])
        self.explores = np.array([bool(a.explores) for a in agents])
        weights = [s.opponent_weight for s in cfg.agents]
        self.raw = np.ascontiguousarray(game.payoffs)
        self.shaped = np.ascontiguousarray(shaped_table(game.payoffs, weights))
        warm = [tuple(int(x) for x in history_rng.integers(n, size=k)) for _ in range(self.memory_len)]
        self.state = encode(warm, n, self.memory_len)
        self.last_joint = warm[0]
        self.stable = 0

    def epsilons(self, periods: np.ndarray) -> np.ndarray:
        eps = np.exp(-np.outer(periods, self.beta))
        return np.where(self.explores[None, :], eps, 0.0)

    def play(self, t0: int, stop: int, schedule: list[Override], rngs, recorder: Recorder,
             stability: int, check: bool, stop_on_converge: bool) -> tuple[int, int | None]:
        """Run periods [t0, stop); returns (periods executed, convergence period or None)."""
        game, k, n = self.game, self.game.n_agents, self.game.n_actions
        t = t0
        converged_at = None
        target = stability if check else np.iinfo(np.int64).max
        cuts = _boundaries(t0, stop, self.cfg.chunk, schedule)
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            m = hi - lo
            # two uniforms per agent and period, drawn row-major so the stream does
            # not depend on where chunks are cut
            u_explore = np.empty((m, k))
            u_action = np.empty((m, k), dtype=np.int64)
            for i in range(k):
                u = rngs[i].random((m, 2))
                u_explore[:, i] = u[:, 0]
                u_action[:, i] = np.minimum((u[:, 1] * n).astype(np.int64), n - 1)
            forced = np.tile(self.fixed, (m, 1))
            for ov in schedule:
                if ov.active(lo):
                    forced[:, ov.agent] = self.last_joint[ov.agent] if ov.action == "hold" else ov.action
            out_a = np.empty((m, k), dtype=np.int64)
            out_r = np.empty((m, k))
            done, state, stable, conv = tabular_chunk(
                self.q, self.greedy, self.state, lo, m, self.shaped, self.raw, self.alpha,
                self.gamma, self.beta, self.learns, self.explores, u_explore, u_action, forced,
                n, game.n_joint, self.keep_mod, self.stable, target, stop_on_converge, out_a, out_r)
            if not np.isfinite(self.q).all():
                raise NumericalError(f"non-finite Q-value in periods [{lo}, {lo + done})")
            if done:
                periods = np.arange(lo, lo + done)
                recorder.add(periods, out_a[:done], out_r[:done], self.epsilons(periods),
                             np.full((done, k), np.nan))
                self.last_joint = tuple(int(a) for a in out_a[done - 1])
            self.state, self.stable = int(state), int(stable)
            t = lo + done
            if conv >= 0 and converged_at is None:
                converged_at = lo + conv
                if stop_on_converge:
                    break
        return t - t0, converged_at

    def sync_agents(self) -> None:
        for i, ag in enumerate(self.agents):
            if isinstance(ag, TabularAgent):
                ag.table.values[...] = self.q[i]

    def cycle(self):
        path, start = greedy_cycle(self.greedy, self.state, self.game.n_actions,
                                   self.game.n_joint, self.keep_mod, 10_000)
        if start < 0:
            return None, None
        states = path[start:]
        moves = np.array([[self.greedy[i, s] for i in range(self.game.n_agents)] for s in states])
        profits = self.raw[[self.game.joint(mv) for mv in moves]].mean(axis=0)
        return moves, profits


def _run_kernel(cfg: ExperimentConfig, game: Game, replica: int, streams) -> RunRecord:
    agents = [build_agent(s, game, i, streams[i + 1]) for i, s in enumerate(cfg.agents)]
    kg = KernelGame(cfg, game, agents, streams[0])
    rec = Recorder(game.n_agents, cfg.record_stride, _tail(cfg))
    rule = cfg.convergence
    train = schedule_for(cfg, game, "start", 0, cfg.horizon)
    done, conv = kg.play(0, cfg.horizon, train, streams[1:], rec, rule.stability,
                         rule.enabled, rule.enabled and rule.stop_on_converge)
    anchor = done
    total = done
    if cfg.post_periods:
        post = schedule_for(cfg, game, "convergence", anchor, anchor + cfg.post_periods)
        more, _ = kg.play(anchor, anchor + cfg.post_periods, post, streams[1:], rec,
                          rule.stability, False, False)
        total += more
    kg.sync_agents()
    moves, profits = kg.cycle()
    return rec.record(replica, game, n_periods=total, converged_at=conv, anchor_period=anchor,
                      greedy=[g.copy() for g in kg.greedy], final_state=kg.state,
                      cycle_actions=moves, cycle_profits=profits,
                      tables=[ag.table.values.copy() if isinstance(ag, TabularAgent) else None
                              for ag in agents])


def _tail(cfg: ExperimentConfig) -> int | None:
    return cfg.record_tail


# ---------------------------------------------------------------- python path

class LoopGame:
    """Period-by-period play for games with neural agents."""

    def __init__(self, cfg: ExperimentConfig, game: Game, agents, history_rng):
        self.cfg, self.game, self.agents = cfg, game, agents
        k, n = game.n_agents, game.n_actions
        depth = max(a.memory_len for a in agents)
        self.history: deque = deque(maxlen=depth)
        for _ in range(depth):
            self.history.append(tuple(int(x) for x in history_rng.integers(n, size=k)))
        self.weights = [s.opponent_weight for s in cfg.agents]
        self.shaped = shaped_table(game.payoffs, self.weights)

    def play(self, t0: int, stop: int, schedule: list[Override], recorder: Recorder,
             tracker: ConvergenceTracker | None, stop_on_converge: bool) -> int:
        game, agents = self.game, self.agents
        k = game.n_agents
        previous = self.history[0]
        hold_ref: dict[int, tuple] = {}
        for t in range(t0, stop):
            obs = [ag.observe_state(self.history) for ag in agents]
            proposed = [ag.act(o, t) for ag, o in zip(agents, obs)]
            for ov in schedule:
                if ov.start == t:
                    hold_ref[id(ov)] = previous
            effective = list(proposed)
            for ov in schedule:
                if ov.active(t):
                    ref = hold_ref.get(id(ov), previous)
                    effective[ov.agent] = int(ref[ov.agent]) if ov.action == "hold" else int(ov.action)
            joint = tuple(effective)
            j = game.joint(joint)
            self.history.appendleft(joint)
            changed = False
            p_on = np.full(k, np.nan)
            for i, ag in enumerate(agents):
                nxt = ag.observe_state(self.history)
                if isinstance(ag, DualBufferAgent):
                    changed |= bool(ag.learn(obs[i], joint, self.shaped[j, i], nxt, i,
                                             profit=game.payoffs[j, i]))
                    p_on[i] = ag.p_online
                else:
                    changed |= bool(ag.learn(obs[i], joint, self.shaped[j, i], nxt, i))
            if not np.isfinite(game.payoffs[j]).all():
                raise NumericalError(f"non-finite payoff at period {t}")
            recorder.add([t], [joint], [game.payoffs[j]], [[ag.epsilon(t) for ag in agents]], [p_on])
            previous = joint
            if tracker is not None and tracker.update(changed) and stop_on_converge:
                return t + 1 - t0
        return stop - t0


def _run_loop(cfg: ExperimentConfig, game: Game, replica: int, streams) -> RunRecord:
    agents = [build_agent(s, game, i, streams[i + 1]) for i, s in enumerate(cfg.agents)]
    lg = LoopGame(cfg, game, agents, streams[0])
    rec = Recorder(game.n_agents, cfg.record_stride, _tail(cfg))
    rule = cfg.convergence
    tracker = ConvergenceTracker(rule.stability) if rule.enabled else None
    train = schedule_for(cfg, game, "start", 0, cfg.horizon)
    done = lg.play(0, cfg.horizon, train, rec, tracker, rule.enabled and rule.stop_on_converge)
    total = done
    if cfg.post_periods:
        post = schedule_for(cfg, game, "convergence", done, done + cfg.post_periods)
        total += lg.play(done, done + cfg.post_periods, post, rec, None, False)
    return rec.record(replica, game, n_periods=total,
                      converged_at=tracker.converged_at if tracker else None, anchor_period=done)


# ---------------------------------------------------------------- entry point

def run_replica(cfg: ExperimentConfig, replica: int, game: Game | None = None) -> RunRecord:
    game = game if game is not None else build_game(cfg)
    streams = replica_streams(cfg.seed, cfg.n_monte_carlo, game.n_agents)[replica]
    if kernel_eligible(cfg):
        return _run_kernel(cfg, game, replica, streams)
    return _run_loop(cfg, game, replica, streams)


def prepare(cfg: ExperimentConfig) -> Game:
    """Validate and build everything that can fail before any replica starts."""
    validate(cfg)
    game = build_game(cfg)
    for i, spec in enumerate(cfg.agents):
        build_agent(spec, game, i, np.random.default_rng(0))
    schedule_for(cfg, game, "start", 0, cfg.horizon)
    schedule_for(cfg, game, "convergence", 0, cfg.post_periods)
    return game


def run_experiment(cfg: ExperimentConfig) -> list[RunRecord]:
    game = prepare(cfg)
    records = []
    for r in range(cfg.n_monte_carlo):
        try:
            records.append(run_replica(cfg, r, game))
        except NumericalError as exc:
            raise NumericalError(f"replica {r}: {exc}") from exc
    return records
