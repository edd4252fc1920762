"""Shared helpers for the experiment scripts."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from algocollusion import cli


def parser(description: str, out: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out", default=out, help="output directory")
    p.add_argument("--replicas", type=int, help="override the number of Monte Carlo replicas")
    p.add_argument("--seed", type=int)
    return p


def call(*argv: str) -> None:
    code = cli.main([str(a) for a in argv])
    if code:
        sys.exit(code)


def overrides(args) -> list[str]:
    extra = []
    if args.replicas is not None:
        extra += ["--replicas", args.replicas]
    if args.seed is not None:
        extra += ["--seed", args.seed]
    return extra


def show(path: Path) -> None:
    print(f"== {path}")
    print(path.read_text(), end="")
