import re

import numpy as np
import pytest

from algocollusion import cli, results, svg
from algocollusion.errors import ConfigError
from algocollusion.harness import presets
from algocollusion.harness.config import emit, load
from algocollusion.harness.runner import run_experiment


@pytest.fixture
def pd_dir(tmp_path):
    cfg = presets.prisoners_dilemma(replicas=3, horizon=30_000)
    cfg.record_tail = 5_000
    cfg.summary_window = 2_000
    path = tmp_path / "pd.yaml"
    path.write_text(emit(cfg))
    out = tmp_path / "pd_out"
    assert cli.main(["run", "--config", str(path), "--out", str(out)]) == 0
    return cfg, out


# ---------------------------------------------------------------- CSV and summaries

def test_csv_layout(pd_dir):
    cfg, out = pd_dir
    lines = (out / "results.csv").read_text().splitlines()
    assert lines[0] == ",".join(results.COLUMNS)
    assert {len(line.split(",")) for line in lines} == {len(results.COLUMNS)}
    assert len(lines) == 1 + 3 * 5_000 * 2
    table = results.read_results(out / "results.csv")
    assert table.replicas == [0, 1, 2]
    # matrix games have no prices and no online-sampling probability
    assert np.isnan(table.price).all() and np.isnan(table.p_online).all()


def test_nine_significant_digits():
    assert results.fmt(0.123456789123) == "0.123456789"
    assert results.fmt(1234567891.5) == "1.23456789e+09"
    assert results.fmt(None) == "" and results.fmt(float("nan")) == ""


def test_summary_recomputed_from_csv(pd_dir):
    cfg, out = pd_dir
    records = run_experiment(load(out / "effective_config.yaml"))
    direct = results.summarize_records(records, cfg.summary_window)
    replay = results.summarize_table(results.read_results(out / "results.csv"), cfg.summary_window)
    for a, b in zip(direct, replay):
        assert np.allclose(a.final_reward, b.final_reward, atol=1e-9, rtol=0)
        assert np.array_equal(a.final_action, b.final_action)


def test_market_summary_replay(tmp_path):
    cfg = presets.duopoly(replicas=2, horizon=300_000)
    records = run_experiment(cfg)
    results.write_results(records, tmp_path / "r.csv")
    bench = (0.2229266600090192, 0.3374904595088809)
    direct = results.summarize_records(records, cfg.summary_window, bench)
    replay = results.summarize_table(results.read_results(tmp_path / "r.csv"), cfg.summary_window, bench)
    for a, b in zip(direct, replay):
        assert np.allclose(a.final_reward, b.final_reward, atol=1e-9, rtol=0)
        assert np.allclose(a.delta, b.delta, atol=1e-8, rtol=0)
        assert np.allclose(a.final_price, b.final_price, atol=1e-8, rtol=0)


def test_summary_file_contents(pd_dir):
    _, out = pd_dir
    text = (out / "summary.txt").read_text()
    assert "rho_d: -2" in text and "rho_c: -1" in text
    assert "mean final_reward:" in text


@pytest.mark.parametrize("body, line", [
    ("replica,period\n", 1),
    (",".join(results.COLUMNS) + "\n0,1,0,1,,-1,0.5\n", 2),
    (",".join(results.COLUMNS) + "\n0,x,0,1,,-1,0.5,\n", 2),
])
def test_bad_results_file(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(ConfigError) as err:
        results.read_results(path)
    assert f"bad.csv:{line}" in str(err.value)


# ---------------------------------------------------------------- SVG

def test_reward_plot_reference_lines(pd_dir):
    _, out = pd_dir
    assert cli.main(["plot", "--csv", str(out / "results.csv"), "--kind", "reward-trajectory",
                     "--out", str(out / "a.svg")]) == 0
    text = (out / "a.svg").read_text()
    assert "rho_d" in text and "rho_c" in text
    refs = _reference_lines(text)
    assert float(refs["rho_d"][0]) == -2.0 and float(refs["rho_c"][0]) == -1.0
    # the drawn height agrees with the y axis mapping of the tick labels
    (ya, va), (yb, vb) = _ticks(text)[0], _ticks(text)[-1]
    for label, (value, y) in refs.items():
        assert float(y) == pytest.approx(ya + (float(value) - va) * (yb - ya) / (vb - va), abs=0.02)
    assert cli.main(["plot", "--csv", str(out / "results.csv"), "--kind", "reward-trajectory",
                     "--out", str(out / "b.svg")]) == 0
    assert (out / "a.svg").read_bytes() == (out / "b.svg").read_bytes()


def _reference_lines(text: str) -> dict:
    found = re.findall(r'class="reference" data-label="([^"]+)" data-value="([^"]+)" points="[\d.]+,([\d.]+) ', text)
    return {label: (value, y) for label, value, y in found}


def _ticks(text: str) -> list:
    # label baselines sit 4px below the tick; keep only exactly printed values
    found = re.findall(r'y="([\d.]+)" text-anchor="end" font-size="11">([-\d.e+]+)</text>', text)
    return [(float(y) - 4, float(v)) for y, v in found if float(v) == round(float(v), 3)]


def test_price_response_band(tmp_path):
    cfg = presets.response("cut", replicas=2)
    path = tmp_path / "cut.yaml"
    path.write_text(emit(cfg))
    out = tmp_path / "cut"
    assert cli.main(["respond", "--config", str(path), "--out", str(out)]) == 0
    assert cli.main(["plot", "--csv", str(out / "results.csv"), "--kind", "price-response",
                     "--out", str(out)]) == 0
    text = (out / "price-response.svg").read_text()
    assert text.count('class="intervention"') == 1
    assert "p_nash" in text and "p_monopoly" in text


def test_chart_rejects_empty():
    with pytest.raises(ConfigError):
        svg.reward_trajectory(np.array([0, 1]), np.full((2, 1), np.nan), {})


def test_sweep_bars(tmp_path):
    rows = [dict(beta=1e-5, agent=0, mean_profit=0.3, median_profit=0.3, n=2),
            dict(beta=1e-5, agent=1, mean_profit=0.31, median_profit=0.31, n=2)]
    text = svg.sweep_bars(rows, {"pi_nash": 0.22, "pi_monopoly": 0.34})
    assert text == svg.sweep_bars(rows, {"pi_nash": 0.22, "pi_monopoly": 0.34})
    assert "beta=1e-05" in text


# ---------------------------------------------------------------- CLI

def test_solve_eq_defaults(capsys):
    assert cli.main(["solve-eq"]) == 0
    out = capsys.readouterr().out
    assert "p_nash: 1.472927" in out and "p_monopoly: 1.924981" in out
    assert len(out.splitlines()[2].split()) == 16


def test_solve_eq_five_agents(capsys):
    assert cli.main(["solve-eq", "--agents", "5"]) == 0
    assert "p_nash: 1.311521" in capsys.readouterr().out


def test_solve_eq_bad_mu(capsys):
    assert cli.main(["solve-eq", "--mu", "0"]) == 2
    assert "mu" in capsys.readouterr().err


def test_missing_config(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path / "o")]) == 2
    assert "absent.yaml" in capsys.readouterr().err


def test_schema_violation_exit(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("name: x\nhorizon: 10\nfoo: 1\n")
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "foo" in capsys.readouterr().err


def test_dry_run_writes_nothing(tmp_path, capsys):
    path = tmp_path / "pd.yaml"
    path.write_text(emit(presets.prisoners_dilemma()))
    out = tmp_path / "never"
    assert cli.main(["run", "--config", str(path), "--out", str(out), "--dry-run"]) == 0
    assert not out.exists()
    assert "n_monte_carlo: 20" in capsys.readouterr().out


def test_seed_and_replica_flags(tmp_path):
    path = tmp_path / "pd.yaml"
    path.write_text(emit(presets.prisoners_dilemma(horizon=1_000)))
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(path), "--out", str(out), "--seed", "9", "--replicas", "2"]) == 0
    cfg = load(out / "effective_config.yaml")
    assert cfg.seed == 9 and cfg.n_monte_carlo == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_exit(tmp_path, capsys):
    cfg = presets.prisoners_dilemma(replicas=1, horizon=5_000)
    cfg.environment.matrix.rho_t = 1e308
    cfg.environment.matrix.rho_c = 9e307
    cfg.environment.matrix.rho_d = 8e307
    cfg.environment.matrix.rho_l = 7e307
    path = tmp_path / "big.yaml"
    path.write_text(emit(cfg))
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 3
    err = capsys.readouterr().err
    assert "replica 0" in err and "period" in err


def test_sweep_command(tmp_path):
    cfg = presets.exploration_sweep(replicas=2, betas=(1e-5, 1e-4))
    cfg.horizon = 100_000
    path = tmp_path / "sweep.yaml"
    path.write_text(emit(cfg))
    out = tmp_path / "s"
    assert cli.main(["sweep", "--config", str(path), "--out", str(out)]) == 0
    rows = results.read_sweep(out / "sweep.csv")
    assert [(r["beta"], r["agent"]) for r in rows] == [(1e-5, 0), (1e-5, 1), (1e-4, 0), (1e-4, 1)]
    assert cli.main(["plot", "--csv", str(out / "sweep.csv"), "--kind", "sweep-bars",
                     "--out", str(out / "bars.svg")]) == 0


def test_plot_schema_mismatch(tmp_path, pd_dir):
    _, out = pd_dir
    bad = out / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert cli.main(["plot", "--csv", str(bad), "--kind", "reward-trajectory", "--out",
                     str(tmp_path / "x.svg")]) == 2
