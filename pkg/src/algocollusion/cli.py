"""Command-line entry point.

Subcommands: solve-eq, run, plot, sweep, respond, dual-buffer. Exit status is
0 on success, 2 for configuration or validation errors and 3 for numerical
failures during a run.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import results, svg
from .errors import CollusionError, ConfigError, NumericalError
from .harness import config as cfgmod
from .harness import presets
from .harness.experiments import (response_experiment, response_summary, run_newcomer,
                                  sweep_exploration, time_to_fraction)
from .harness.runner import Game, build_game, prepare, run_experiment
from .market import MarketParams, grid_for, monopoly_price, nash_price

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
log = logging.getLogger("algocollusion")


# ---------------------------------------------------------------- helpers

def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "replicas", None) is not None:
        cfg.n_monte_carlo = args.replicas
    return cfgmod.validate(cfg)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _references(game: Game) -> dict:
    if game.kind == "market":
        return {"pi_nash": game.nash_reward, "pi_monopoly": game.coop_reward}
    return {"rho_d": game.nash_reward, "rho_c": game.coop_reward}


def _write_common(out: Path, cfg, records, game: Game, extra: dict | None = None) -> None:
    results.write_results(records, out / "results.csv")
    summaries = results.summarize_records(records, cfg.summary_window,
                                          (game.nash_reward, game.coop_reward) if game.kind == "market" else None)
    (out / "summary.txt").write_text(results.format_summary(summaries, cfg.name, _references(game), extra))
    (out / "effective_config.yaml").write_text(cfgmod.emit(cfg))


def _load_or_preset(args, preset):
    cfg = cfgmod.load(args.config) if args.config else preset()
    return _apply_overrides(cfg, args)


def _dry_run(cfg) -> int:
    prepare(cfg)
    sys.stdout.write(cfgmod.emit(cfg))
    return EXIT_OK


# ---------------------------------------------------------------- commands

def cmd_solve_eq(args) -> int:
    params = MarketParams.symmetric(args.agents, args.mu, args.a0, args.quality, args.cost)
    p_n, p_m = nash_price(params), monopoly_price(params)
    grid = grid_for(params, args.xi, args.m)
    print(f"p_nash: {p_n:.6f}")
    print(f"p_monopoly: {p_m:.6f}")
    print("grid: " + " ".join(f"{p:.6f}" for p in grid.points))
    return EXIT_OK


def cmd_run(args) -> int:
    if not args.config:
        raise ConfigError("run needs --config", "--config")
    cfg = _apply_overrides(cfgmod.load(args.config), args)
    if args.dry_run:
        return _dry_run(cfg)
    if cfg.newcomer is not None:
        return _newcomer_outputs(cfg, args)
    game = prepare(cfg)
    records = run_experiment(cfg)
    _write_common(_out_dir(args), cfg, records, game)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_or_preset(args, presets.exploration_sweep)
    if cfg.sweep is None:
        cfg.sweep = cfgmod.SweepSpec()
    if args.dry_run:
        return _dry_run(cfg)
    game = prepare(cfg)
    rows = sweep_exploration(cfg)
    out = _out_dir(args)
    results.write_sweep(rows, out / "sweep.csv")
    lines = [f"# {cfg.name}"] + [f"{k}: {results.fmt(v)}" for k, v in _references(game).items()]
    lines.append("beta  agent  mean_profit  median_profit")
    lines += [f"{results.fmt(r.beta)}  {r.agent}  {results.fmt(r.mean_profit)}  {results.fmt(r.median_profit)}"
              for r in rows]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    (out / "effective_config.yaml").write_text(cfgmod.emit(cfg))
    return EXIT_OK


def cmd_respond(args) -> int:
    cfg = _load_or_preset(args, lambda: presets.response(args.preset))
    if args.dry_run:
        return _dry_run(cfg)
    game = prepare(cfg)
    res = response_experiment(cfg)
    stats = response_summary(res)
    _write_common(_out_dir(args), cfg, res.records, game,
                  {"undercut_fraction": results.fmt(stats["undercut_fraction"]),
                   "recovery_periods": stats["recovery_periods"]})
    return EXIT_OK


def _newcomer_outputs(cfg, args) -> int:
    game = prepare(cfg)
    records = run_newcomer(cfg)
    nc = cfg.newcomer
    extra = {}
    for rec in records:
        online = rec.rewards[rec.periods >= nc.observation_periods, nc.newcomer_agent]
        offline = rec.rewards[rec.periods < nc.observation_periods, nc.newcomer_agent]
        if len(offline):
            extra[f"replica {rec.replica} offline_mean_profit"] = results.fmt(offline.mean())
        if len(online) >= 1000:
            extra[f"replica {rec.replica} periods_to_95pct"] = time_to_fraction(online)
    _write_common(_out_dir(args), cfg, records, game, extra)
    return EXIT_OK


def cmd_dual_buffer(args) -> int:
    cfg = _load_or_preset(args, lambda: presets.newcomer(args.preset))
    if cfg.newcomer is None:
        raise ConfigError("config has no newcomer section", "newcomer")
    if args.dry_run:
        return _dry_run(cfg)
    return _newcomer_outputs(cfg, args)


def _config_for_plot(args) -> cfgmod.ExperimentConfig:
    path = Path(args.config) if args.config else Path(args.csv).parent / "effective_config.yaml"
    return cfgmod.load(path)


def _smooth(x: np.ndarray, width: int) -> np.ndarray:
    if width <= 1 or len(x) < width:
        return x
    kernel = np.ones(width)
    norm = np.convolve(np.ones(len(x)), kernel, mode="same")
    return np.stack([np.convolve(x[:, i], kernel, mode="same") / norm for i in range(x.shape[1])], axis=1)


def cmd_plot(args) -> int:
    cfg = _config_for_plot(args)
    game = build_game(cfg)
    kind = args.kind
    if kind == "sweep-bars":
        text = svg.sweep_bars(results.read_sweep(args.csv), _references(game))
    else:
        table = results.read_results(args.csv)
        if not table.replicas:
            raise ConfigError("results file has no rows", args.csv)
        if kind == "reward-trajectory":
            periods, inverse = np.unique(table.period, return_inverse=True)
            k = int(table.agent.max()) + 1
            sums = np.zeros((len(periods), k))
            counts = np.zeros((len(periods), k))
            np.add.at(sums, (inverse, table.agent), table.reward)
            np.add.at(counts, (inverse, table.agent), 1)
            mean = _smooth(sums / counts, max(1, len(periods) // 200))
            text = svg.reward_trajectory(periods, mean, _references(game), cfg.name)
        elif kind == "price-response":
            text = _plot_response(cfg, table, game)
        else:
            text = _plot_timeline(cfg, table, game)
    out = Path(args.out)
    if out.suffix != ".svg":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{kind}.svg"
    out.write_text(text)
    return EXIT_OK


def _price_refs(game: Game) -> dict:
    return {"p_nash": game.grid.p_nash, "p_monopoly": game.grid.p_monopoly}


def _plot_response(cfg, table, game) -> str:
    if game.grid is None or cfg.post_periods < 1:
        raise ConfigError("price-response plots need a market run with post_periods", "post_periods")
    before = 5
    paths = []
    for r in table.replicas:
        prices = table.series(r, "price")
        if len(prices) < cfg.post_periods + before:
            raise ConfigError(f"replica {r} has too few rows for a response plot", "record_tail")
        paths.append(prices[-(cfg.post_periods + before):])
    offsets = np.arange(-before, cfg.post_periods)
    anchored = [iv for iv in cfg.interventions if iv.anchor == "convergence"]
    band = None
    if anchored:
        start = min(iv.start for iv in anchored)
        end = max(cfg.post_periods if iv.permanent else iv.end for iv in anchored)
        band = (start - 0.5, end - 0.5)
    return svg.price_response(offsets, np.median(np.array(paths), axis=0), band, _price_refs(game), cfg.name)


def _plot_timeline(cfg, table, game) -> str:
    if cfg.newcomer is None or game.grid is None:
        raise ConfigError("dual-buffer timelines need a newcomer config", "newcomer")
    nc = cfg.newcomer
    r = table.replicas[0]
    periods = table.periods(r)
    prices = _smooth(table.series(r, "price"), 25)
    p_on = table.series(r, "p_online")[:, nc.newcomer_agent]
    band = None
    if nc.switch_start is not None:
        end = nc.switch_end if nc.switch_end is not None else nc.online_periods
        band = (nc.observation_periods + nc.switch_start, nc.observation_periods + end)
    return svg.dual_buffer_timeline(periods, prices, p_on, band, _price_refs(game), cfg.name)


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="algocollusion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-eq", help="symmetric Nash and monopoly prices and the price grid")
    p.add_argument("--agents", type=int, default=2)
    p.add_argument("--mu", type=float, default=0.25)
    p.add_argument("--a0", type=float, default=0.0)
    p.add_argument("--quality", type=float, default=2.0)
    p.add_argument("--cost", type=float, default=1.0)
    p.add_argument("--xi", type=float, default=0.1)
    p.add_argument("--m", type=int, default=15)
    p.set_defaults(func=cmd_solve_eq)

    def common(p, preset_choices=None):
        p.add_argument("--config")
        p.add_argument("--out", default="out")
        p.add_argument("--seed", type=int)
        p.add_argument("--replicas", type=int)
        p.add_argument("--dry-run", action="store_true")
        if preset_choices:
            p.add_argument("--preset", choices=preset_choices, default=preset_choices[0])

    p = sub.add_parser("run", help="run an experiment config")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="exploration-decay sweep for one agent")
    common(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("respond", help="response of converged agents to forced prices")
    common(p, presets.RESPONSE_KINDS)
    p.set_defaults(func=cmd_respond)
    p = sub.add_parser("dual-buffer", help="incumbent/newcomer scenarios")
    common(p, presets.NEWCOMER_KINDS)
    p.set_defaults(func=cmd_dual_buffer)

    p = sub.add_parser("plot", help="SVG chart from a results or sweep CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--kind", choices=svg.KINDS, required=True)
    p.add_argument("--config", help="effective config (defaults to the one beside the CSV)")
    p.add_argument("--out", default="plot.svg")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CollusionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
