"""Experiment configuration: dataclasses plus strict YAML parsing and emission.

Every mapping is checked against its dataclass; unknown keys and type
mismatches raise :class:`ConfigError` carrying a dotted location such as
``agents[1].dqn.lr``. ``parse(emit(cfg)) == cfg`` holds for every valid config.
"""

from __future__ import annotations

import dataclasses
import math
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import yaml

from ..errors import ConfigError, ParameterError

SCHEMA_VERSION = 1

AGENT_KINDS = ("tabular", "dqn", "dual_buffer", "fixed")
ENV_KINDS = ("market", "matrix_game")
SYMBOLIC_ACTIONS = ("above_nash", "lowest", "highest", "hold")


@dataclass
class MarketSpec:
    n_agents: int = 2
    mu: float = 0.25
    a0: float = 0.0
    quality: float = 2.0
    marginal_cost: float = 1.0
    xi: float = 0.1
    m: int = 15


@dataclass
class MatrixGameSpec:
    rho_t: float = 0.0
    rho_c: float = -1.0
    rho_d: float = -2.0
    rho_l: float = -3.0


@dataclass
class EnvironmentSpec:
    kind: str = "market"
    market: MarketSpec = field(default_factory=MarketSpec)
    matrix: MatrixGameSpec = field(default_factory=MatrixGameSpec)


@dataclass
class DQNSpec:
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    lr: float = 1e-3
    optimizer: str = "adam"
    batch_size: int = 32
    replay_capacity: int = 10_000
    target_sync: int = 500
    updates_per_step: int = 1
    # rescale profits to Nash = 0 and monopoly = (1 - gamma) before storing
    normalize_rewards: bool = True


@dataclass
class DualSpec:
    offline_capacity: int = 4000
    online_capacity: int = 400
    offline_weight: float = 0.5
    rolling_window: int = 100
    profit_threshold_frac: float = 0.9
    p_online_low: float = 0.2
    p_online_high: float = 0.9
    pretrain_updates: int = 2000
    credit_offline_steps: bool = True


@dataclass
class AgentSpec:
    kind: str = "tabular"
    alpha: float = 0.125
    gamma: float = 0.95
    beta: float = 1e-5
    # "auto": reward-bound rescaling on markets, raw uniform on matrix games
    q_init: str = "auto"
    q_init_low: float = 0.0
    q_init_high: float = 1.0
    memory_len: int = 1
    opponent_weight: float = 0.0
    learns: bool = True
    explores: bool = True
    action: Union[int, str, None] = None
    snapshot: Union[str, None] = None
    dqn: DQNSpec = field(default_factory=DQNSpec)
    dual: DualSpec = field(default_factory=DualSpec)


@dataclass
class ConvergenceRule:
    enabled: bool = True
    stability: int = 25_000
    stop_on_converge: bool = True


@dataclass
class Intervention:
    agent: int = 0
    start: int = 0
    # exclusive end; ignored when permanent
    end: Union[int, None] = None
    action: Union[int, str, None] = None
    price: Union[float, None] = None
    permanent: bool = False
    # "start": periods count from the first period; "convergence": from the
    # period at which the convergence rule fired (or the horizon if it did not)
    anchor: str = "start"


@dataclass
class SweepSpec:
    agent: int = 1
    betas: list[float] = field(default_factory=lambda: [1e-5, 2e-5, 5e-5, 1e-4])


@dataclass
class NewcomerSpec:
    # incumbent: "match" copies the rival's last price, "constant" holds
    # equilibrium_action, "snapshot" loads the incumbent agent's Q-table
    incumbent: str = "match"
    incumbent_agent: int = 0
    newcomer_agent: int = 1
    equilibrium_action: int = 11
    observation_periods: int = 4000
    observation_noise: float = 0.0
    online_periods: int = 10_000
    cold_start: bool = False
    switch_start: Union[int, None] = None
    switch_end: Union[int, None] = None
    switch_action: Union[int, str] = "above_nash"


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    name: str = "experiment"
    seed: int = 0
    n_monte_carlo: int = 1
    horizon: int = 100_000
    post_periods: int = 0
    record_stride: int = 1
    # keep only the last N recorded periods (None keeps all)
    record_tail: Union[int, None] = None
    summary_window: int = 10_000
    chunk: int = 100_000
    environment: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    agents: list[AgentSpec] = field(default_factory=lambda: [AgentSpec(), AgentSpec()])
    convergence: ConvergenceRule = field(default_factory=ConvergenceRule)
    interventions: list[Intervention] = field(default_factory=list)
    sweep: Union[SweepSpec, None] = None
    newcomer: Union[NewcomerSpec, None] = None

    @property
    def n_agents(self) -> int:
        return len(self.agents)


# ---------------------------------------------------------------- conversion

def _type_name(tp) -> str:
    return getattr(tp, "__name__", str(tp))


def _convert(value: Any, tp, loc: str):
    origin = typing.get_origin(tp)
    if origin in (Union, types.UnionType):
        options = typing.get_args(tp)
        if value is None:
            if type(None) in options:
                return None
            raise ConfigError("value must not be null", loc)
        errors = []
        for opt in options:
            if opt is type(None):
                continue
            try:
                return _convert(value, opt, loc)
            except ConfigError as exc:
                errors.append(exc)
        names = " or ".join(_type_name(o) for o in options if o is not type(None))
        raise ConfigError(f"expected {names}, got {value!r}", loc)
    if origin is list:
        (inner,) = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {type(value).__name__}", loc)
        return [_convert(v, inner, f"{loc}[{i}]") for i, v in enumerate(value)]
    if dataclasses.is_dataclass(tp):
        return from_dict(tp, value, loc)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", loc)
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", loc)
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", loc)
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", loc)
        return value
    raise ConfigError(f"unsupported field type {tp!r}", loc)


def from_dict(cls, data, loc: str = ""):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"expected a mapping, got {type(data).__name__}", loc or "<root>")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            where = f"{loc}.{key}" if loc else str(key)
            raise ConfigError(f"unknown key '{key}'", where)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in data:
            where = f"{loc}.{f.name}" if loc else f.name
            kwargs[f.name] = _convert(data[f.name], hints[f.name], where)
    return cls(**kwargs)


def to_dict(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, list):
        return [to_dict(v) for v in obj]
    return obj


# ---------------------------------------------------------------- validation

def _need(cond: bool, msg: str, loc: str) -> None:
    if not cond:
        raise ConfigError(msg, loc)


def _check_action_ref(value, n_actions: int, loc: str) -> None:
    if isinstance(value, str):
        _need(value in SYMBOLIC_ACTIONS, f"action must be an index or one of {SYMBOLIC_ACTIONS}", loc)
    elif value is not None:
        _need(0 <= value < n_actions, f"action {value} outside [0, {n_actions})", loc)


def n_actions_of(cfg: ExperimentConfig) -> int:
    return cfg.environment.market.m if cfg.environment.kind == "market" else 2


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Cross-field checks; raises :class:`ConfigError` naming the offending key."""
    _need(cfg.schema_version == SCHEMA_VERSION,
          f"unsupported schema version {cfg.schema_version} (expected {SCHEMA_VERSION})", "schema_version")
    _need(0 <= cfg.seed < 2 ** 64, "seed must be a 64-bit unsigned integer", "seed")
    _need(cfg.n_monte_carlo >= 1, "must be at least 1", "n_monte_carlo")
    _need(cfg.horizon >= 0, "must be non-negative", "horizon")
    _need(cfg.post_periods >= 0, "must be non-negative", "post_periods")
    _need(cfg.record_stride >= 1, "must be at least 1", "record_stride")
    _need(cfg.record_tail is None or cfg.record_tail >= 1, "must be at least 1", "record_tail")
    _need(cfg.summary_window >= 1, "must be at least 1", "summary_window")
    _need(cfg.chunk >= 1, "must be at least 1", "chunk")
    env = cfg.environment
    _need(env.kind in ENV_KINDS, f"must be one of {ENV_KINDS}", "environment.kind")
    if env.kind == "market":
        mk = env.market
        _need(mk.n_agents >= 1, "must be positive", "environment.market.n_agents")
        _need(math.isfinite(mk.mu) and mk.mu > 0, f"mu must be positive, got {mk.mu}", "environment.market.mu")
        _need(mk.marginal_cost > 0, "must be positive", "environment.market.marginal_cost")
        _need(mk.m >= 2, "need at least 2 grid points", "environment.market.m")
        _need(mk.xi >= 0, "must be non-negative", "environment.market.xi")
        _need(len(cfg.agents) == mk.n_agents,
              f"{len(cfg.agents)} agents configured for a market with n_agents={mk.n_agents}", "agents")
    else:
        mx = env.matrix
        _need(mx.rho_t > mx.rho_c > mx.rho_d > mx.rho_l,
              "payoffs must satisfy rho_t > rho_c > rho_d > rho_l", "environment.matrix")
        _need(len(cfg.agents) == 2, "matrix games take exactly 2 agents", "agents")
    n_act = n_actions_of(cfg)
    for i, ag in enumerate(cfg.agents):
        loc = f"agents[{i}]"
        _need(ag.kind in AGENT_KINDS, f"kind must be one of {AGENT_KINDS}", f"{loc}.kind")
        _need(0 <= ag.alpha <= 1, "must lie in [0, 1]", f"{loc}.alpha")
        _need(0 <= ag.gamma < 1, "must lie in [0, 1)", f"{loc}.gamma")
        _need(ag.beta > 0, "must be positive", f"{loc}.beta")
        _need(ag.q_init in ("auto", "uniform", "reward_bounds", "uniform_opponent"),
              "must be auto, uniform, reward_bounds or uniform_opponent", f"{loc}.q_init")
        _need(ag.q_init_low <= ag.q_init_high, "q_init_low exceeds q_init_high", f"{loc}.q_init_low")
        _need(ag.memory_len >= 1, "must be at least 1", f"{loc}.memory_len")
        _need(ag.opponent_weight >= 0, "must be non-negative", f"{loc}.opponent_weight")
        if ag.kind == "fixed":
            _need(ag.action is not None, "fixed agents need an action", f"{loc}.action")
            _need(ag.action != "hold", "'hold' is only meaningful in interventions", f"{loc}.action")
        _check_action_ref(ag.action, n_act, f"{loc}.action")
        if ag.kind in ("dqn", "dual_buffer"):
            _need(env.kind == "market", "neural agents need price features (market environment)", f"{loc}.kind")
            d = ag.dqn
            _need(all(h >= 1 for h in d.hidden), "hidden widths must be positive", f"{loc}.dqn.hidden")
            _need(d.lr > 0, "must be positive", f"{loc}.dqn.lr")
            _need(d.optimizer in ("adam", "sgd"), "must be adam or sgd", f"{loc}.dqn.optimizer")
            for name in ("batch_size", "replay_capacity", "target_sync"):
                _need(getattr(d, name) >= 1, "must be positive", f"{loc}.dqn.{name}")
            _need(d.updates_per_step >= 0, "must be non-negative", f"{loc}.dqn.updates_per_step")
        if ag.kind == "dual_buffer":
            try:
                dual_config(ag.dual)
            except ParameterError as exc:
                raise ConfigError(str(exc), f"{loc}.dual") from None
        if ag.kind == "tabular" and ag.snapshot is None:
            size = n_act ** (len(cfg.agents) * ag.memory_len)
            _need(size <= 50_000_000, f"Q-table of {size} states is too large", f"{loc}.memory_len")
    _need(cfg.convergence.stability >= 1, "must be at least 1", "convergence.stability")
    for i, iv in enumerate(cfg.interventions):
        loc = f"interventions[{i}]"
        _need(0 <= iv.agent < len(cfg.agents), f"agent {iv.agent} does not exist", f"{loc}.agent")
        _need(iv.anchor in ("start", "convergence"), "must be start or convergence", f"{loc}.anchor")
        _need(iv.start >= 0, "must be non-negative", f"{loc}.start")
        _need((iv.action is None) != (iv.price is None), "give exactly one of action or price", loc)
        if iv.price is not None:
            _need(env.kind == "market", "price overrides need a market", f"{loc}.price")
        _check_action_ref(iv.action, n_act, f"{loc}.action")
        if not iv.permanent:
            _need(iv.end is not None, "non-permanent interventions need an end", f"{loc}.end")
            _need(iv.end > iv.start, "end must exceed start", f"{loc}.end")
        if iv.anchor == "start":
            _need(iv.start < max(cfg.horizon, 1), "starts beyond the horizon", f"{loc}.start")
            if iv.end is not None:
                _need(iv.end <= cfg.horizon, "ends beyond the horizon", f"{loc}.end")
        else:
            _need(iv.start < max(cfg.post_periods, 1), "starts beyond post_periods", f"{loc}.start")
            if iv.end is not None and not iv.permanent:
                _need(iv.end <= cfg.post_periods, "ends beyond post_periods", f"{loc}.end")
    if cfg.sweep is not None:
        _need(0 <= cfg.sweep.agent < len(cfg.agents), "agent does not exist", "sweep.agent")
        _need(len(cfg.sweep.betas) > 0 and all(b > 0 for b in cfg.sweep.betas),
              "need positive beta values", "sweep.betas")
    if cfg.newcomer is not None:
        nc = cfg.newcomer
        _need(env.kind == "market", "the newcomer scenario needs a market", "newcomer")
        _need(len(cfg.agents) == 2, "the newcomer scenario is a duopoly", "agents")
        _need(nc.incumbent in ("match", "constant", "snapshot"),
              "must be match, constant or snapshot", "newcomer.incumbent")
        _need({nc.incumbent_agent, nc.newcomer_agent} == {0, 1},
              "incumbent and newcomer must be agents 0 and 1", "newcomer")
        if nc.incumbent == "snapshot":
            _need(cfg.agents[nc.incumbent_agent].snapshot is not None,
                  "snapshot incumbent needs agents[i].snapshot", f"agents[{nc.incumbent_agent}].snapshot")
        _need(cfg.agents[nc.newcomer_agent].kind in ("dqn", "dual_buffer"),
              "the newcomer must be a dqn or dual_buffer agent", f"agents[{nc.newcomer_agent}].kind")
        _need(0 <= nc.equilibrium_action < n_act, "outside the action set", "newcomer.equilibrium_action")
        _need(nc.observation_periods >= 0, "must be non-negative", "newcomer.observation_periods")
        _need(0 <= nc.observation_noise <= 1, "must lie in [0, 1]", "newcomer.observation_noise")
        _need(nc.online_periods >= 0, "must be non-negative", "newcomer.online_periods")
        _check_action_ref(nc.switch_action, n_act, "newcomer.switch_action")
        _need(nc.switch_action != "hold", "'hold' is not a switch target", "newcomer.switch_action")
        if nc.switch_start is not None:
            _need(0 <= nc.switch_start < max(nc.online_periods, 1), "outside the online phase", "newcomer.switch_start")
            if nc.switch_end is not None:
                _need(nc.switch_start < nc.switch_end <= nc.online_periods,
                      "must lie after switch_start and within the online phase", "newcomer.switch_end")
    return cfg


def dual_config(d: DualSpec):
    from ..agents.dqn import DualBufferConfig
    return DualBufferConfig(**to_dict(d))


# ---------------------------------------------------------------- YAML I/O

def parse(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}", where) from None
    return validate(from_dict(ExperimentConfig, data))


def emit(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=False)


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse(text, str(path))
