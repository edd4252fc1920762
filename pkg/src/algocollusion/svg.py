"""Static SVG charts written by hand: fixed viewport, no timestamps, so the same
input always yields the same bytes."""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError

WIDTH, HEIGHT = 800, 450
MARGIN = dict(left=70, right=150, top=40, bottom=50)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
MAX_POINTS = 600
KINDS = ("reward-trajectory", "price-response", "sweep-bars", "dual-buffer-timeline")


def _n(x: float) -> str:
    return f"{x:.2f}"


@dataclass
class Chart:
    title: str
    xlabel: str
    ylabel: str
    xlim: tuple[float, float]
    ylim: tuple[float, float]
    parts: list[str] = field(default_factory=list)
    legend: list[tuple[str, str, str]] = field(default_factory=list)

    def __post_init__(self):
        lo, hi = self.xlim
        if hi <= lo:
            self.xlim = (lo - 0.5, hi + 0.5)
        lo, hi = self.ylim
        if not np.isfinite(lo) or not np.isfinite(hi):
            raise ConfigError("nothing to plot: no finite values", "plot")
        if hi <= lo:
            pad = abs(lo) * 0.05 or 0.5
            self.ylim = (lo - pad, hi + pad)

    def x(self, v: float) -> float:
        lo, hi = self.xlim
        return MARGIN["left"] + (v - lo) / (hi - lo) * (WIDTH - MARGIN["left"] - MARGIN["right"])

    def y(self, v: float) -> float:
        lo, hi = self.ylim
        return HEIGHT - MARGIN["bottom"] - (v - lo) / (hi - lo) * (HEIGHT - MARGIN["top"] - MARGIN["bottom"])

    def line(self, xs, ys, color: str, label: str | None = None, dash: str | None = None,
             width: float = 1.5, attrs: str = "") -> None:
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        ok = np.isfinite(xs) & np.isfinite(ys)
        xs, ys = xs[ok], ys[ok]
        if len(xs) == 0:
            return
        if len(xs) > MAX_POINTS:
            idx = np.linspace(0, len(xs) - 1, MAX_POINTS).round().astype(int)
            xs, ys = xs[idx], ys[idx]
        pts = " ".join(f"{_n(self.x(a))},{_n(self.y(b))}" for a, b in zip(xs, ys))
        style = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<polyline{attrs} points="{pts}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{style}/>')
        if label:
            self.legend.append((label, color, dash or ""))

    def hline(self, value: float, color: str, label: str) -> None:
        lo, hi = self.xlim
        self.line([lo, hi], [value, value], color, label, dash="6,4", width=1.0,
                  attrs=f' class="reference" data-label="{escape(label)}" data-value="{value:.9g}"')

    def band(self, x0: float, x1: float, label: str = "forced") -> None:
        a, b = self.x(max(x0, self.xlim[0])), self.x(min(x1, self.xlim[1]))
        top, bottom = self.y(self.ylim[1]), self.y(self.ylim[0])
        self.parts.insert(0, f'<rect class="intervention" x="{_n(a)}" y="{_n(top)}" '
                             f'width="{_n(max(b - a, 1.0))}" height="{_n(bottom - top)}" '
                             f'fill="#d62728" fill-opacity="0.15"/>')
        self.legend.append((label, "#f4c7c7", "band"))

    def bar(self, x0: float, x1: float, value: float, color: str) -> None:
        base = self.y(max(self.ylim[0], 0.0) if self.ylim[0] <= 0 <= self.ylim[1] else self.ylim[0])
        top = self.y(value)
        y0, h = min(base, top), abs(base - top)
        self.parts.append(f'<rect x="{_n(self.x(x0))}" y="{_n(y0)}" width="{_n(self.x(x1) - self.x(x0))}" '
                          f'height="{_n(h)}" fill="{color}"/>')

    def _axes(self) -> list[str]:
        x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
        y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
        out = [f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#000"/>',
               f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#000"/>']
        for v in np.linspace(*self.xlim, 5):
            out.append(f'<text x="{_n(self.x(v))}" y="{y0 + 18}" text-anchor="middle" '
                       f'font-size="11">{v:.4g}</text>')
        for v in np.linspace(*self.ylim, 5):
            out.append(f'<text x="{x0 - 6}" y="{_n(self.y(v) + 4)}" text-anchor="end" '
                       f'font-size="11">{v:.4g}</text>')
        out.append(f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle" '
                   f'font-size="13">{escape(self.xlabel)}</text>')
        out.append(f'<text x="18" y="{(y0 + y1) / 2:.2f}" text-anchor="middle" font-size="13" '
                   f'transform="rotate(-90 18 {(y0 + y1) / 2:.2f})">{escape(self.ylabel)}</text>')
        out.append(f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="15">'
                   f'{escape(self.title)}</text>')
        return out

    def _legend(self) -> list[str]:
        out = []
        x = WIDTH - MARGIN["right"] + 12
        for i, (label, color, dash) in enumerate(self.legend):
            y = MARGIN["top"] + 16 * i + 8
            if dash == "band":
                out.append(f'<rect x="{x}" y="{y - 6}" width="18" height="10" fill="{color}"/>')
            else:
                style = f' stroke-dasharray="{dash}"' if dash else ""
                out.append(f'<line x1="{x}" y1="{y}" x2="{x + 18}" y2="{y}" stroke="{color}" '
                           f'stroke-width="2"{style}/>')
            out.append(f'<text x="{x + 24}" y="{y + 4}" font-size="11">{escape(label)}</text>')
        return out

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}">')
        body = ['<rect width="100%" height="100%" fill="#fff"/>', *self.parts, *self._axes(),
                *self._legend()]
        return "\n".join([head, *body, "</svg>"]) + "\n"


def _limits(*arrays, refs=()) -> tuple[float, float]:
    vals = np.concatenate([np.ravel(np.asarray(a, float)) for a in arrays] + [np.asarray(refs, float)])
    vals = vals[np.isfinite(vals)]
    if len(vals) == 0:
        return (np.nan, np.nan)
    lo, hi = float(vals.min()), float(vals.max())
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def reward_trajectory(periods, mean_rewards, references: dict, title: str = "Reward per period") -> str:
    """``mean_rewards`` has shape (periods, agents); ``references`` maps label -> level."""
    mean_rewards = np.asarray(mean_rewards, float)
    chart = Chart(title, "period", "reward", (float(periods[0]), float(periods[-1])) if len(periods) else (0, 1),
                  _limits(mean_rewards, refs=list(references.values())))
    for i in range(mean_rewards.shape[1]):
        chart.line(periods, mean_rewards[:, i], COLORS[i % len(COLORS)], f"agent {i}")
    for j, (label, value) in enumerate(references.items()):
        chart.hline(value, "#555" if j == 0 else "#999", label)
    return chart.render()


def price_response(offsets, prices, band: tuple[float, float] | None, references: dict,
                   title: str = "Price response") -> str:
    """``prices`` has shape (offsets, agents), typically a cross-replica median."""
    prices = np.asarray(prices, float)
    chart = Chart(title, "periods after intervention", "price", (float(offsets[0]), float(offsets[-1])),
                  _limits(prices, refs=list(references.values())))
    if band is not None:
        chart.band(*band)
    for i in range(prices.shape[1]):
        chart.line(offsets, prices[:, i], COLORS[i % len(COLORS)], f"agent {i}")
    for j, (label, value) in enumerate(references.items()):
        chart.hline(value, "#555" if j == 0 else "#999", label)
    return chart.render()


def sweep_bars(rows: list[dict], references: dict, title: str = "Post-convergence profit") -> str:
    betas = sorted({r["beta"] for r in rows})
    agents = sorted({r["agent"] for r in rows})
    values = [r["mean_profit"] for r in rows]
    lo, hi = _limits(values, refs=list(references.values()))
    chart = Chart(title, "exploration decay index (beta)", "profit", (-0.5, len(betas) - 0.5),
                  (min(lo, 0.0), hi))
    width = 0.8 / max(len(agents), 1)
    for r in rows:
        b, a = betas.index(r["beta"]), agents.index(r["agent"])
        x0 = b - 0.4 + a * width
        chart.bar(x0, x0 + width, r["mean_profit"], COLORS[a % len(COLORS)])
    for a in agents:
        chart.legend.append((f"agent {a}", COLORS[a % len(COLORS)], ""))
    for j, (label, value) in enumerate(references.items()):
        chart.hline(value, "#555" if j == 0 else "#999", label)
    for b, beta in enumerate(betas):
        chart.parts.append(f'<text x="{_n(chart.x(b))}" y="{HEIGHT - MARGIN["bottom"] + 32}" '
                           f'text-anchor="middle" font-size="10">beta={beta:.3g}</text>')
    return chart.render()


def dual_buffer_timeline(periods, prices, p_online, band, references: dict,
                         title: str = "Incumbent and newcomer") -> str:
    """Prices of both agents with the newcomer's online sampling probability
    drawn against the same axis after mapping [0, 1] onto the price range."""
    prices = np.asarray(prices, float)
    lo, hi = _limits(prices, refs=list(references.values()))
    chart = Chart(title, "period", "price", (float(periods[0]), float(periods[-1])), (lo, hi))
    if band is not None:
        chart.band(*band, label="incumbent forced")
    for i in range(prices.shape[1]):
        chart.line(periods, prices[:, i], COLORS[i % len(COLORS)], f"agent {i} price")
    if p_online is not None:
        chart.line(periods, lo + np.asarray(p_online, float) * (hi - lo), COLORS[2],
                   "p_online (0-1 scaled)", dash="2,2")
    for j, (label, value) in enumerate(references.items()):
        chart.hline(value, "#555" if j == 0 else "#999", label)
    return chart.render()
