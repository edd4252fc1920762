"""Vary the exploration decay of agent 1 and compare post-convergence profits."""

from pathlib import Path

from _common import call, overrides, parser, show

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

if __name__ == "__main__":
    args = parser(__doc__.splitlines()[0], "out/sweep").parse_args()
    out = Path(args.out)
    call("sweep", "--config", CONFIGS / "sweep.yaml", "--out", out, *overrides(args))
    call("plot", "--csv", out / "sweep.csv", "--kind", "sweep-bars", "--out", out / "sweep-bars.svg")
    show(out / "summary.txt")
