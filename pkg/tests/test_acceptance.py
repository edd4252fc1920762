"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary. Run directly with ``python tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from algocollusion import cli
from algocollusion.agents.nn import Batch, ValueNet, td_loss, td_loss_and_grads, td_targets
from algocollusion.agents.snapshot import save
from algocollusion.agents.tabular import policy_table, policy_value_oracle
from algocollusion.harness import presets
from algocollusion.harness.config import (AgentSpec, ConvergenceRule, EnvironmentSpec,
                                          ExperimentConfig)
from algocollusion.harness.experiments import (gain, post_convergence_profits, response_experiment,
                                               response_summary, run_newcomer, time_to_fraction)
from algocollusion.harness.runner import build_game, run_experiment
from algocollusion.market import MarketParams, demand, monopoly_price, nash_price

pytestmark = pytest.mark.acceptance


def test_equilibrium_values(acceptance):
    t0 = time.perf_counter()
    duo = MarketParams.symmetric(2)
    five = MarketParams.symmetric(5)
    got = (nash_price(duo), monopoly_price(duo), nash_price(five))
    elapsed = time.perf_counter() - t0
    want = (1.472927, 1.924981, 1.311521)
    ok = all(abs(g - w) < 1e-4 for g, w in zip(got, want)) and elapsed < 1.0
    acceptance("equilibrium values", ok,
               f"nash2={got[0]:.6f} monopoly2={got[1]:.6f} nash5={got[2]:.6f} in {elapsed:.3f}s")
    assert ok


def test_markup(acceptance):
    markup = (nash_price(MarketParams.symmetric(2)) - 1.0) / 1.0
    ok = abs(markup - 0.4729) <= 0.001
    acceptance("markup", ok, f"(p_nash - c)/c = {markup:.5f}")
    assert ok


def test_demand_normalization(acceptance):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10_000):
        k = int(rng.integers(1, 7))
        params = MarketParams(k, float(rng.uniform(0.01, 2.0)), float(rng.uniform(-3, 3)),
                              tuple(rng.uniform(-2, 5, k)), tuple(rng.uniform(0.1, 3, k)))
        out = demand(params, rng.uniform(0, 10, k))
        worst = max(worst, abs(out.shares.sum() + out.outside_share - 1.0))
    ok = worst <= 1e-12
    acceptance("demand normalization", ok, f"max |sum q - 1| = {worst:.2e} over 10000 draws")
    assert ok


def test_pd_learning(acceptance):
    t0 = time.perf_counter()
    coop = run_experiment(presets.prisoners_dilemma(gamma=0.95))
    means = np.array([r.rewards.mean() for r in coop])
    n_coop = int(np.sum(np.abs(means + 1.0) <= 0.15))
    myopic = run_experiment(presets.prisoners_dilemma(gamma=0.0))
    n_defect = sum(all(np.all(g == 1) for g in r.greedy) for r in myopic)
    elapsed = time.perf_counter() - t0
    ok = n_coop >= 15 and n_defect >= 19 and elapsed < 300
    acceptance("PD learning", ok,
               f"cooperative {n_coop}/20 (gamma=0.95), always-defect {n_defect}/20 (gamma=0), {elapsed:.1f}s")
    assert ok


def _frozen_opponent_values(tmp_path, opponent_policy, name):
    path = tmp_path / f"{name}.snapshot"
    save(policy_table(opponent_policy, 2), path)
    cfg = ExperimentConfig(
        name=name, seed=11, n_monte_carlo=1, horizon=400_000,
        environment=EnvironmentSpec(kind="matrix_game"),
        agents=[AgentSpec(alpha=0.1, gamma=0.95, beta=1e-5),
                AgentSpec(snapshot=str(path), learns=False, explores=False)],
        convergence=ConvergenceRule(enabled=False), record_tail=10)
    rec = run_experiment(cfg)[0]
    game = build_game(cfg)
    learner = rec.greedy[0]
    oracle = policy_value_oracle(game.payoffs, 2, [learner, np.asarray(opponent_policy)], 0.95)[:, 0]
    learned = rec.tables[0].max(axis=1)
    # only states the frozen opponent can produce are ever visited after period 0
    reachable = sorted({a0 + 2 * int(b) for a0 in range(2) for b in opponent_policy})
    return learned[reachable], oracle[reachable], learner


def test_oracle_equivalence(tmp_path, acceptance):
    # states: joint index a0 + 2 a1 of the previous period; the opponent is agent 1
    tit_for_tat = np.array([0, 1, 0, 1])   # copy agent 0's last action
    always_defect = np.ones(4, dtype=int)
    v_tft, o_tft, pol_tft = _frozen_opponent_values(tmp_path, tit_for_tat, "tft")
    v_ad, o_ad, pol_ad = _frozen_opponent_values(tmp_path, always_defect, "alld")
    err = max(np.abs(v_tft - o_tft).max(), np.abs(v_ad - o_ad).max())
    anchors = abs(o_tft[0] + 20.0) < 1e-6 and bool(np.allclose(o_ad, -40.0, atol=1e-6))
    ok = err <= 1e-3 and anchors and pol_tft[0] == 0 and bool(np.all(pol_ad[2:] == 1))
    acceptance("oracle equivalence", ok,
               f"max |v_learned - v_oracle| = {err:.2e}; v(CC) vs tit-for-tat = {o_tft[0]:.4f}; "
               f"v vs always-defect = {o_ad.min():.4f}..{o_ad.max():.4f}")
    assert ok


def test_tabular_duopoly(acceptance):
    t0 = time.perf_counter()
    cfg = presets.duopoly()
    records = run_experiment(cfg)
    game = build_game(cfg)
    deltas = np.array([gain(r.cycle_profits, game.nash_reward, game.coop_reward) for r in records])
    lowest = min(float(game.grid.points[r.cycle_actions].min()) for r in records)
    converged = sum(r.converged_at is not None for r in records)
    med = float(np.median(deltas))
    elapsed = time.perf_counter() - t0
    ok = med > 0.2 and lowest > game.grid.p_nash and elapsed < 900
    acceptance("tabular duopoly", ok,
               f"median delta {med:.3f}, lowest converged price {lowest:.4f} > p_nash {game.grid.p_nash:.4f}, "
               f"{converged}/10 converged, {elapsed:.1f}s")
    assert ok


def test_response_function(acceptance):
    res = response_experiment(presets.response("cut", replicas=20))
    stats = response_summary(res, responder=1, tol=0.10, within=30)
    ok = stats["undercut_fraction"] >= 0.70 and stats["recovered"]
    acceptance("response function", ok,
               f"rival undercuts next period in {stats['undercut_fraction']:.0%} of 20; "
               f"median prices within 10% after {stats['recovery_periods']} periods")
    assert ok


def test_exploration_asymmetry(acceptance):
    cfg = presets.duopoly(beta2=1e-4)
    profits = np.array([post_convergence_profits(r, cfg.summary_window) for r in run_experiment(cfg)])
    slow, fast = float(np.median(profits[:, 0])), float(np.median(profits[:, 1]))
    ok = slow >= fast
    acceptance("exploration asymmetry", ok,
               f"median profit beta=1e-5: {slow:.4f} vs beta=1e-4: {fast:.4f}")
    assert ok


def test_gradient_correctness(acceptance):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        widths = [int(rng.integers(1, 6))] + [int(rng.integers(1, 7)) for _ in range(int(rng.integers(1, 3)))] \
            + [int(rng.integers(1, 5))]
        net = ValueNet.init(widths, rng)
        for b in net.biases:
            b[...] = rng.normal(0, 0.5, b.shape)
        target = ValueNet.init(widths, rng)
        n = int(rng.integers(1, 9))
        batch = Batch(rng.normal(size=(n, widths[0])), rng.integers(widths[-1], size=n),
                      rng.normal(size=n), rng.normal(size=(n, widths[0])), rng.uniform(0.2, 1.0, n))
        y = td_targets(target, batch, 0.9)
        _, grads = td_loss_and_grads(net, batch, y)
        for p, g in zip(net.parameters(), grads):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + 1e-5
                up = td_loss(net, batch, y)
                p[idx] = old - 1e-5
                down = td_loss(net, batch, y)
                p[idx] = old
                fd = (up - down) / 2e-5
                scale = max(abs(fd), abs(g[idx]), 1e-6)
                worst = max(worst, abs(fd - g[idx]) / scale)
    ok = worst <= 1e-4
    acceptance("gradient correctness", ok, f"max relative error {worst:.2e} over 20 nets")
    assert ok


def test_dual_buffer_controller(acceptance):
    cfg = presets.newcomer("switch")
    rec = run_newcomer(cfg)[0]
    window = cfg.agents[1].dual.rolling_window
    low, high = cfg.agents[1].dual.p_online_low, cfg.agents[1].dual.p_online_high
    sw = rec.markers["switch_start"]
    p_on = rec.p_online[:, 1]
    before = float(p_on[sw - 1])
    flips = np.nonzero(p_on[sw:sw + window] == high)[0]
    pre_price = float(rec.prices[sw - 1, 1])
    post_median = float(np.median(rec.prices[sw:sw + 200, 1]))
    ok = before == low and len(flips) > 0 and post_median < pre_price
    acceptance("dual-buffer controller", ok,
               f"p_online {before} before switch, high after {flips[0] + 1 if len(flips) else 'never'} periods; "
               f"newcomer price {pre_price:.4f} -> median {post_median:.4f}")
    assert ok


def test_convergence_speed(acceptance):
    warm = run_newcomer(presets.newcomer("stationary", replicas=5))
    cold = run_newcomer(presets.newcomer("cold", replicas=5))
    obs = presets.newcomer("stationary").newcomer.observation_periods
    pairs = []
    for w, c in zip(warm, cold):
        tw = time_to_fraction(w.rewards[w.periods >= obs, 1])
        tc = time_to_fraction(c.rewards[c.periods >= obs, 1])
        pairs.append((tw, tc))
    wins = sum(tw < tc for tw, tc in pairs)
    ok = wins >= 4
    acceptance("convergence speed", ok,
               f"warm faster in {wins}/5 pairs; (warm, cold) periods to 95%: {pairs}")
    assert ok


def test_determinism(tmp_path, acceptance):
    cfg = presets.duopoly(replicas=2, horizon=200_000)
    cfg.record_tail = 2000
    path = tmp_path / "duo.yaml"
    from algocollusion.harness.config import emit
    path.write_text(emit(cfg))
    blobs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert cli.main(["run", "--config", str(path), "--out", str(out)]) == 0
        blobs.append((out / "results.csv").read_bytes())
    nc = presets.newcomer("stationary")
    nc.newcomer.online_periods = 1500
    path_nc = tmp_path / "nc.yaml"
    path_nc.write_text(emit(nc))
    for run in ("c", "d"):
        out = tmp_path / run
        assert cli.main(["run", "--config", str(path_nc), "--out", str(out)]) == 0
        blobs.append((out / "results.csv").read_bytes())
    ok = blobs[0] == blobs[1] and blobs[2] == blobs[3]
    acceptance("determinism", ok, f"tabular CSV {len(blobs[0])} bytes, neural CSV {len(blobs[2])} bytes, "
               "byte-identical on rerun" if ok else "CSV differs on rerun")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
