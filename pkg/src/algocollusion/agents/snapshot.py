"""Plain-text snapshots of Q-tables and value networks.

Layout, one token group per line::

    algocollusion-snapshot 1
    kind qtable            | kind valuenet
    dims <n_states> <n_actions> | layers <n_layers>
    <values, row-major, one per line>

A value network stores, for each layer, a ``weight <in> <out>`` header followed
by its row-major entries and a ``bias <out>`` header followed by the biases.
Values are written with ``%.17g`` so a reload is bit-exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .nn import ValueNet
from .tabular import QTable

MAGIC = "algocollusion-snapshot"
VERSION = 1


def _values(arr: np.ndarray) -> list[str]:
    return ["%.17g" % v for v in np.asarray(arr, dtype=float).ravel()]


def dumps(obj: QTable | ValueNet) -> str:
    lines = [f"{MAGIC} {VERSION}"]
    if isinstance(obj, QTable):
        lines += ["kind qtable", f"dims {obj.n_states} {obj.n_actions}", *_values(obj.values)]
    elif isinstance(obj, ValueNet):
        lines += ["kind valuenet", f"layers {len(obj.weights)}"]
        for w, b in zip(obj.weights, obj.biases):
            lines.append(f"weight {w.shape[0]} {w.shape[1]}")
            lines += _values(w)
            lines.append(f"bias {b.shape[0]}")
            lines += _values(b)
    else:
        raise TypeError(f"cannot snapshot {type(obj).__name__}")
    return "\n".join(lines) + "\n"


class _Reader:
    """Line cursor; error locations are 1-based line numbers."""

    def __init__(self, text: str, source: str):
        self.lines = text.splitlines()
        self.pos = 0
        self.source = source

    def fail(self, msg: str, line: int | None = None):
        raise ConfigError(msg, f"{self.source}:{self.pos + 1 if line is None else line}")

    def header(self, key: str, n: int) -> list[int]:
        if self.pos >= len(self.lines):
            self.fail(f"expected '{key}' header, found end of file")
        parts = self.lines[self.pos].split()
        if len(parts) != n + 1 or parts[0] != key:
            self.fail(f"expected '{key}' with {n} integer(s)")
        try:
            dims = [int(p) for p in parts[1:]]
        except ValueError:
            self.fail(f"non-integer dimension in '{key}' header")
        if min(dims) < 1:
            self.fail(f"dimensions in '{key}' header must be positive")
        self.pos += 1
        return dims

    def block(self, shape: tuple[int, ...]) -> np.ndarray:
        n = int(np.prod(shape))
        chunk = self.lines[self.pos:self.pos + n]
        if len(chunk) < n:
            self.fail(f"expected {n} values, found {len(chunk)}", self.pos + len(chunk) + 1)
        values = np.empty(n)
        for i, text in enumerate(chunk):
            try:
                values[i] = float(text)
            except ValueError:
                self.fail(f"malformed numeric value {text.strip()!r}", self.pos + i + 1)
        self.pos += n
        return values.reshape(shape)


def loads(text: str, source: str = "<snapshot>") -> QTable | ValueNet:
    r = _Reader(text, source)
    if not r.lines or r.lines[0].split() != [MAGIC, str(VERSION)]:
        r.fail(f"missing '{MAGIC} {VERSION}' header")
    r.pos = 1
    kind = r.lines[1].split() if len(r.lines) > 1 else []
    if kind in (["kind", "qtable"], ["kind", "valuenet"]):
        r.pos = 2
    if kind == ["kind", "qtable"]:
        n_states, n_actions = r.header("dims", 2)
        obj = QTable(r.block((n_states, n_actions)))
    elif kind == ["kind", "valuenet"]:
        (n_layers,) = r.header("layers", 1)
        weights, biases = [], []
        for _ in range(n_layers):
            weights.append(r.block(tuple(r.header("weight", 2))))
            biases.append(r.block(tuple(r.header("bias", 1))))
        obj = ValueNet(weights, biases)
    else:
        r.fail("unknown snapshot kind")
    for i in range(r.pos, len(r.lines)):
        if r.lines[i].strip():
            r.fail("trailing content after snapshot", i + 1)
    return obj


def save(obj: QTable | ValueNet, path) -> None:
    Path(path).write_text(dumps(obj))


def load(path) -> QTable | ValueNet:
    path = Path(path)
    if not path.is_file():
        raise ConfigError("snapshot file not found", str(path))
    return loads(path.read_text(), str(path))
