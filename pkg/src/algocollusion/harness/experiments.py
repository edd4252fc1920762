"""Experiment families built on the runner: metrics, response functions,
exploration sweeps and the incumbent/newcomer scenario."""

from __future__ import annotations

import copy
import dataclasses
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..agents.dqn import DualBufferAgent
from ..agents.rewards import shaped_table
from ..agents.snapshot import load as load_snapshot
from ..agents.tabular import QTable, TabularAgent, AgentHyperparams, policy_table
from ..codec import decode, encode, n_states
from ..errors import ConfigError, ParameterError
from ..market import MarketParams, benchmark_profits
from .config import ExperimentConfig
from .runner import (Game, Recorder, RunRecord, build_agent, prepare, replica_streams,
                     resolve_action, run_experiment)


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class ProfitGainMetric:
    delta: np.ndarray      # per agent
    market: float          # of the mean across agents


def gain(profits, pi_nash: float, pi_monopoly: float) -> np.ndarray:
    if pi_monopoly == pi_nash:
        raise ParameterError("monopoly and Nash profits coincide; profit gain undefined")
    return (np.asarray(profits, dtype=float) - pi_nash) / (pi_monopoly - pi_nash)


def profit_gain(mean_profits, params: MarketParams) -> ProfitGainMetric:
    pi_n, pi_m = benchmark_profits(params)
    profits = np.atleast_1d(np.asarray(mean_profits, dtype=float))
    return ProfitGainMetric(gain(profits, pi_n, pi_m), float(gain(profits.mean(), pi_n, pi_m)))


def post_convergence_profits(rec: RunRecord, window: int) -> np.ndarray:
    """Greedy limit-cycle profits when known, else the mean of the last ``window`` records."""
    if rec.cycle_profits is not None:
        return rec.cycle_profits
    return rec.rewards[-window:].mean(axis=0)


def time_to_fraction(profits, frac: float = 0.95, window: int = 100, tail: int = 1000) -> int:
    """First period whose trailing ``window``-mean reaches ``frac`` of the final ``tail``-mean."""
    profits = np.asarray(profits, dtype=float)
    if len(profits) < max(window, tail):
        raise ParameterError("profit series shorter than the smoothing window or tail")
    final = profits[-tail:].mean()
    smooth = np.convolve(profits, np.ones(window) / window, mode="valid")
    hit = np.nonzero(smooth >= frac * final)[0]
    return int(hit[0] + window - 1) if len(hit) else len(profits)


# ---------------------------------------------------------------- response functions

@dataclass
class ResponseResult:
    records: list[RunRecord]
    offsets: np.ndarray          # periods relative to the shock
    prices: np.ndarray           # (replicas, len(offsets), K)
    pre_shock: np.ndarray        # (replicas, K) prices in the period before the shock


def response_experiment(cfg: ExperimentConfig, before: int = 5) -> ResponseResult:
    """Train to convergence, then apply convergence-anchored interventions.

    Prices are aligned on the first period of the post-convergence phase
    (offset 0), with ``before`` periods of pre-shock play kept for reference.
    """
    if cfg.post_periods < 1:
        raise ConfigError("response experiments need post_periods >= 1", "post_periods")
    cfg = dataclasses.replace(cfg, record_stride=1)
    if cfg.record_tail is not None:
        cfg = dataclasses.replace(cfg, record_tail=max(cfg.record_tail, cfg.post_periods + before))
    records = run_experiment(cfg)
    offsets = np.arange(-before, cfg.post_periods)
    rows = []
    for rec in records:
        index = {int(p): i for i, p in enumerate(rec.periods)}
        sel = [index[rec.anchor_period + o] for o in offsets]
        rows.append(rec.prices[sel] if rec.prices is not None else rec.actions[sel].astype(float))
    prices = np.array(rows)
    return ResponseResult(records, offsets, prices, prices[:, before - 1])


def response_summary(res: ResponseResult, responder: int = 1, tol: float = 0.10,
                     within: int = 30) -> dict:
    """Fraction of replicas where ``responder`` undercuts next period, and recovery time."""
    zero = int(np.nonzero(res.offsets == 0)[0][0])
    nxt = res.prices[:, zero + 1, responder]
    lower = nxt < res.pre_shock[:, responder]
    median_path = np.median(res.prices, axis=0)
    pre = np.median(res.pre_shock, axis=0)
    rel = np.abs(median_path - pre) / pre
    ok = np.all(rel <= tol, axis=1)
    after = np.nonzero(ok[zero + 1:])[0]
    recovery = int(after[0] + 1) if len(after) else None
    return {"undercut_fraction": float(lower.mean()), "recovery_periods": recovery,
            "recovered": recovery is not None and recovery <= within}


# ---------------------------------------------------------------- exploration sweep

@dataclass
class SweepRow:
    beta: float
    agent: int
    mean_profit: float
    median_profit: float
    profits: np.ndarray


def sweep_exploration(cfg: ExperimentConfig, betas=None, agent: int | None = None) -> list[SweepRow]:
    """Post-convergence profit per agent for each exploration decay of ``agent``."""
    spec = cfg.sweep
    betas = list(betas if betas is not None else (spec.betas if spec else []))
    agent = agent if agent is not None else (spec.agent if spec else 1)
    if not betas:
        raise ConfigError("no beta values to sweep", "sweep.betas")
    rows = []
    for beta in betas:
        run_cfg = copy.deepcopy(cfg)
        run_cfg.agents[agent].beta = float(beta)
        records = run_experiment(run_cfg)
        profits = np.array([post_convergence_profits(r, cfg.summary_window) for r in records])
        for k in range(profits.shape[1]):
            rows.append(SweepRow(float(beta), k, float(profits[:, k].mean()),
                                 float(np.median(profits[:, k])), profits[:, k]))
    return rows


# ---------------------------------------------------------------- incumbent / newcomer

def incumbent_table(cfg: ExperimentConfig, game: Game) -> QTable:
    """Frozen memory-one Q-table for the incumbent."""
    nc = cfg.newcomer
    spec = cfg.agents[nc.incumbent_agent]
    size = n_states(game.n_actions, 2, spec.memory_len)
    if nc.incumbent == "snapshot":
        table = load_snapshot(spec.snapshot)
        if not isinstance(table, QTable) or table.values.shape != (size, game.n_actions):
            raise ConfigError("snapshot is not a Q-table of matching shape",
                              f"agents[{nc.incumbent_agent}].snapshot")
        return table
    if nc.incumbent == "constant":
        return policy_table(np.full(size, nc.equilibrium_action), game.n_actions)
    # "match": copy the rival's most recent action
    policy = np.array([decode(s, game.n_actions, 2, spec.memory_len)[0][nc.newcomer_agent]
                       for s in range(size)])
    return policy_table(policy, game.n_actions)


def incumbent_newcomer(cfg: ExperimentConfig, replica: int = 0,
                       game: Game | None = None) -> RunRecord:
    """Observation phase, then online play, with an optional incumbent price switch.

    Phase 1 (``observation_periods``): the incumbent plays greedily against the
    pre-newcomer partner, which replays ``equilibrium_action`` (uniform noise with
    probability ``observation_noise``); the newcomer only records transitions
    from the partner's seat. Phase 2 (``online_periods``): the newcomer acts and
    learns. During [switch_start, switch_end) of phase 2 the incumbent is forced
    to ``switch_action``.
    """
    nc = cfg.newcomer
    if nc is None:
        raise ConfigError("missing newcomer section", "newcomer")
    game = game if game is not None else prepare(cfg)
    streams = replica_streams(cfg.seed, cfg.n_monte_carlo, 2)[replica]
    inc_i, new_i = nc.incumbent_agent, nc.newcomer_agent
    inc_spec = cfg.agents[inc_i]
    hp = AgentHyperparams(alpha=0.0, gamma=inc_spec.gamma, beta=inc_spec.beta, memory_len=inc_spec.memory_len)
    incumbent = TabularAgent(2, game.n_actions, hp, streams[inc_i + 1], incumbent_table(cfg, game),
                             learns=False, explores=False)
    newcomer = build_agent(cfg.agents[new_i], game, new_i, streams[new_i + 1])
    dual = isinstance(newcomer, DualBufferAgent)
    env_rng = streams[0]
    shaped = shaped_table(game.payoffs, [s.opponent_weight for s in cfg.agents])
    e = nc.equilibrium_action
    depth = max(incumbent.memory_len, newcomer.memory_len)
    history: deque = deque([(e, e)] * depth, maxlen=depth)
    rec = Recorder(2, cfg.record_stride, cfg.record_tail)
    nan2 = [np.nan, np.nan]

    def joint_of(a_inc: int, a_new: int) -> tuple[int, int]:
        j = [0, 0]
        j[inc_i], j[new_i] = a_inc, a_new
        return tuple(j)

    for t in range(nc.observation_periods):
        a_inc = incumbent.greedy(incumbent.observe_state(history))
        a_new = int(env_rng.integers(game.n_actions)) if env_rng.random() < nc.observation_noise else e
        obs = newcomer.observe_state(history)
        joint = joint_of(a_inc, a_new)
        history.appendleft(joint)
        j = game.joint(joint)
        if dual and not nc.cold_start:
            newcomer.observe_offline(obs, a_new, shaped[j, new_i], newcomer.observe_state(history),
                                     game.payoffs[j, new_i])
        rec.add([t], [joint], [game.payoffs[j]], [[0.0, 0.0]], [nan2])
    if dual and not nc.cold_start and nc.observation_periods:
        newcomer.finish_observation()

    t0 = nc.observation_periods
    sw_end = nc.switch_end if nc.switch_end is not None else nc.online_periods
    switch = resolve_action(game, nc.switch_action, "newcomer.switch_action")
    for t in range(nc.online_periods):
        forced = nc.switch_start is not None and nc.switch_start <= t < sw_end
        a_inc = switch if forced else incumbent.greedy(incumbent.observe_state(history))
        obs = newcomer.observe_state(history)
        a_new = newcomer.act(obs, t)
        joint = joint_of(a_inc, a_new)
        history.appendleft(joint)
        j = game.joint(joint)
        nxt = newcomer.observe_state(history)
        if dual:
            newcomer.learn(obs, joint, shaped[j, new_i], nxt, new_i, profit=game.payoffs[j, new_i])
        else:
            newcomer.learn(obs, joint, shaped[j, new_i], nxt, new_i)
        eps = [0.0, 0.0]
        eps[new_i] = newcomer.epsilon(t)
        p_on = list(nan2)
        if dual and newcomer.baseline is not None:
            p_on[new_i] = newcomer.p_online
        rec.add([t0 + t], [joint], [game.payoffs[j]], [eps], [p_on])

    markers = {"online_start": t0}
    if nc.switch_start is not None:
        markers["switch_start"] = t0 + nc.switch_start
        markers["switch_end"] = t0 + sw_end
    if dual and newcomer.baseline is not None:
        markers["baseline"] = newcomer.baseline
    return rec.record(replica, game, n_periods=t0 + nc.online_periods, anchor_period=t0,
                      markers=markers)


def run_newcomer(cfg: ExperimentConfig) -> list[RunRecord]:
    game = prepare(cfg)
    return [incumbent_newcomer(cfg, r, game) for r in range(cfg.n_monte_carlo)]
