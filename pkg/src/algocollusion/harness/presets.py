"""Ready-made configurations for the standard experiment families."""

from __future__ import annotations

from .config import (AgentSpec, ConvergenceRule, DQNSpec, EnvironmentSpec, ExperimentConfig,
                     Intervention, NewcomerSpec, SweepSpec)

RESPONSE_KINDS = ("cut", "raise", "raise_hold", "nash")
NEWCOMER_KINDS = ("stationary", "collusive", "switch", "cold")

PD_ALPHA = 0.05


def prisoners_dilemma(gamma: float = 0.95, replicas: int = 20, horizon: int = 500_000,
                      seed: int = 0) -> ExperimentConfig:
    agent = AgentSpec(alpha=PD_ALPHA, gamma=gamma, beta=1e-5)
    return ExperimentConfig(
        name=f"pd-gamma{gamma:g}", seed=seed, n_monte_carlo=replicas, horizon=horizon,
        environment=EnvironmentSpec(kind="matrix_game"), agents=[agent, AgentSpec(**vars(agent))],
        convergence=ConvergenceRule(enabled=False), record_tail=10_000, summary_window=10_000)


def duopoly(replicas: int = 10, horizon: int = 2_000_000, seed: int = 0,
            beta2: float = 1e-5) -> ExperimentConfig:
    return ExperimentConfig(
        name="duopoly", seed=seed, n_monte_carlo=replicas, horizon=horizon,
        agents=[AgentSpec(), AgentSpec(beta=beta2)], record_tail=1000, summary_window=1000)


def exploration_sweep(replicas: int = 10, seed: int = 0, betas=(1e-5, 2e-5, 5e-5, 1e-4)) -> ExperimentConfig:
    cfg = duopoly(replicas=replicas, seed=seed)
    cfg.name = "exploration-sweep"
    cfg.sweep = SweepSpec(agent=1, betas=[float(b) for b in betas])
    return cfg


def response(kind: str = "cut", replicas: int = 20, seed: int = 0, post_periods: int = 40,
             hold: int = 1) -> ExperimentConfig:
    """Converged duopolies hit by a forced action of agent 0 right after convergence."""
    if kind not in RESPONSE_KINDS:
        raise ValueError(f"unknown response preset {kind!r}; choose from {RESPONSE_KINDS}")
    cfg = duopoly(replicas=replicas, seed=seed)
    cfg.name = f"response-{kind}"
    cfg.post_periods = post_periods
    cfg.record_tail = post_periods + 100
    one = dict(anchor="convergence", start=0, end=1)
    if kind == "cut":
        ivs = [Intervention(agent=0, action="above_nash", **one)]
    elif kind == "raise":
        ivs = [Intervention(agent=0, action="highest", **one)]
    elif kind == "raise_hold":
        ivs = [Intervention(agent=0, action="highest", **one),
               Intervention(agent=1, action="hold", anchor="convergence", start=0, end=hold)]
    else:
        ivs = [Intervention(agent=0, action="above_nash", anchor="convergence", start=0,
                            permanent=True)]
    cfg.interventions = ivs
    return cfg


def newcomer_agent(kind: str = "dual_buffer", opponent_weight: float = 0.0) -> AgentSpec:
    return AgentSpec(kind=kind, beta=1e-3, memory_len=10, opponent_weight=opponent_weight,
                     dqn=DQNSpec(target_sync=100))


def newcomer(kind: str = "stationary", replicas: int = 1, seed: int = 0) -> ExperimentConfig:
    """Match-pricing incumbent (agent 0) and a neural newcomer (agent 1)."""
    if kind not in NEWCOMER_KINDS:
        raise ValueError(f"unknown newcomer preset {kind!r}; choose from {NEWCOMER_KINDS}")
    spec = NewcomerSpec()
    agent = newcomer_agent()
    if kind == "collusive":
        agent = newcomer_agent(opponent_weight=1.0)
    elif kind == "switch":
        spec.online_periods = 9000
        spec.switch_start, spec.switch_end = 3000, 6000
    elif kind == "cold":
        agent = newcomer_agent(kind="dqn")
        spec.cold_start = True
    return ExperimentConfig(
        name=f"newcomer-{kind}", seed=seed, n_monte_carlo=replicas, horizon=0,
        agents=[AgentSpec(learns=False, explores=False), agent],
        convergence=ConvergenceRule(enabled=False), newcomer=spec, summary_window=1000)
