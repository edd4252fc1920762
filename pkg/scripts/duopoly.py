"""Logit-demand duopoly with tabular Q-learners on a 15-point price grid.

Prints the symmetric benchmarks, then trains until convergence and reports
the profit gain of each replica.
"""

from pathlib import Path

from _common import call, overrides, parser, show

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

if __name__ == "__main__":
    args = parser(__doc__.splitlines()[0], "out/duopoly").parse_args()
    out = Path(args.out)
    call("solve-eq")
    call("run", "--config", CONFIGS / "duopoly.yaml", "--out", out, *overrides(args))
    call("plot", "--csv", out / "results.csv", "--kind", "reward-trajectory",
         "--out", out / "reward-trajectory.svg")
    show(out / "summary.txt")
