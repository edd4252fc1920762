"""Results CSV, summary statistics and their recomputation from the CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

COLUMNS = ("replica", "period", "agent", "action", "price", "reward", "epsilon", "p_online")
SWEEP_COLUMNS = ("beta", "agent", "mean_profit", "median_profit", "n")


def fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".9g")


def write_results(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(COLUMNS) + "\n")
        for rec in records:
            k = rec.actions.shape[1] if rec.actions.ndim == 2 else 0
            lines = []
            for row in range(len(rec.periods)):
                period = int(rec.periods[row])
                for i in range(k):
                    price = "" if rec.prices is None else fmt(rec.prices[row, i])
                    lines.append(f"{rec.replica},{period},{i},{int(rec.actions[row, i])},{price},"
                                 f"{fmt(rec.rewards[row, i])},{fmt(rec.epsilons[row, i])},"
                                 f"{fmt(rec.p_online[row, i])}\n")
            fh.writelines(lines)


@dataclass
class Table:
    """Column arrays of a results CSV, one row per (replica, period, agent)."""

    replica: np.ndarray
    period: np.ndarray
    agent: np.ndarray
    action: np.ndarray
    price: np.ndarray
    reward: np.ndarray
    epsilon: np.ndarray
    p_online: np.ndarray

    def series(self, replica: int, column: str) -> np.ndarray:
        """(periods, agents) array of ``column`` for one replica."""
        mask = self.replica == replica
        agents = self.agent[mask]
        k = int(agents.max()) + 1 if len(agents) else 0
        values = getattr(self, column)[mask]
        return values.reshape(-1, k) if k else values.reshape(0, 0)

    def periods(self, replica: int) -> np.ndarray:
        mask = (self.replica == replica) & (self.agent == 0)
        return self.period[mask]

    @property
    def replicas(self) -> list[int]:
        return sorted(set(int(r) for r in self.replica))


def _num(text: str) -> float:
    return float(text) if text != "" else math.nan


def read_results(path) -> Table:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read results: {exc.strerror}", str(path)) from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ConfigError(f"expected header {','.join(COLUMNS)}", f"{path}:1")
        cols = [[] for _ in COLUMNS]
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(COLUMNS):
                raise ConfigError(f"expected {len(COLUMNS)} fields, found {len(row)}", f"{path}:{lineno}")
            try:
                for i in range(4):
                    cols[i].append(int(row[i]))
                for i in range(4, len(COLUMNS)):
                    cols[i].append(_num(row[i]))
            except ValueError:
                raise ConfigError("malformed number", f"{path}:{lineno}") from None
    ints = [np.array(c, dtype=np.int64) for c in cols[:4]]
    floats = [np.array(c, dtype=float) for c in cols[4:]]
    return Table(*ints, *floats)


# ---------------------------------------------------------------- summaries

@dataclass
class ReplicaSummary:
    replica: int
    final_reward: np.ndarray      # mean over the summary window, per agent
    final_action: np.ndarray
    final_price: np.ndarray | None
    delta: np.ndarray | None
    converged_at: int | None = None


def summarize_arrays(replica: int, rewards: np.ndarray, actions: np.ndarray, prices,
                     window: int, benchmarks=None, converged_at=None) -> ReplicaSummary:
    if len(rewards) == 0:
        k = rewards.shape[1] if rewards.ndim == 2 else 0
        empty = np.full(k, np.nan)
        return ReplicaSummary(replica, empty, empty, None, None, converged_at)
    tail = rewards[-window:].mean(axis=0)
    delta = None
    if benchmarks is not None:
        lo, hi = benchmarks
        delta = (tail - lo) / (hi - lo)
    final_price = None if prices is None else np.asarray(prices[-1], dtype=float)
    return ReplicaSummary(replica, tail, actions[-1].astype(float), final_price, delta, converged_at)


def summarize_records(records, window: int, benchmarks=None) -> list[ReplicaSummary]:
    return [summarize_arrays(r.replica, r.rewards, r.actions, r.prices, window, benchmarks,
                             r.converged_at) for r in records]


def summarize_table(table: Table, window: int, benchmarks=None) -> list[ReplicaSummary]:
    out = []
    for r in table.replicas:
        prices = table.series(r, "price")
        if np.isnan(prices).all():
            prices = None
        out.append(summarize_arrays(r, table.series(r, "reward"), table.series(r, "action"),
                                    prices, window, benchmarks))
    return out


def _vec(v) -> str:
    return "-" if v is None else " ".join(fmt(x) for x in v)


def format_summary(summaries: list[ReplicaSummary], title: str, reference: dict | None = None,
                   extra: dict | None = None) -> str:
    lines = [f"# {title}"]
    for key, value in (reference or {}).items():
        lines.append(f"{key}: {fmt(value)}")
    lines.append("replica  final_reward  delta  final_price  final_action  converged_at")
    for s in summaries:
        conv = "-" if s.converged_at is None else str(s.converged_at)
        lines.append(f"{s.replica}  {_vec(s.final_reward)}  {_vec(s.delta)}  {_vec(s.final_price)}  "
                     f"{_vec(s.final_action)}  {conv}")
    if summaries:
        lines.append(f"mean final_reward: {_vec(np.mean([s.final_reward for s in summaries], axis=0))}")
        if summaries[0].delta is not None:
            deltas = np.array([s.delta for s in summaries])
            lines.append(f"mean delta: {_vec(deltas.mean(axis=0))}")
            lines.append(f"median delta: {_vec(np.median(deltas, axis=0))}")
    for key, value in (extra or {}).items():
        lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def write_sweep(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(f"{fmt(row.beta)},{row.agent},{fmt(row.mean_profit)},{fmt(row.median_profit)},"
                     f"{len(row.profits)}\n")


def read_sweep(path) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read sweep table: {exc.strerror}", str(path)) from None
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(rows[0]) != SWEEP_COLUMNS:
        raise ConfigError(f"expected header {','.join(SWEEP_COLUMNS)}", f"{path}:1")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            out.append({"beta": float(row[0]), "agent": int(row[1]), "mean_profit": float(row[2]),
                        "median_profit": float(row[3]), "n": int(row[4])})
        except (ValueError, IndexError):
            raise ConfigError("malformed sweep row", f"{path}:{lineno}") from None
    return out
