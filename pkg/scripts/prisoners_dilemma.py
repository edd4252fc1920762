"""Iterated prisoner's dilemma: two tabular learners with one period of memory.

Runs the discount factor 0.95 configuration and the myopic (gamma = 0)
control, writes results.csv / summary.txt per run and a reward trajectory
chart with the mutual-defection and mutual-cooperation levels marked.
"""

from pathlib import Path

from _common import call, overrides, parser, show

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

if __name__ == "__main__":
    args = parser(__doc__.splitlines()[0], "out/pd").parse_args()
    root = Path(args.out)
    for name in ("pd", "pd_myopic"):
        out = root / name
        call("run", "--config", CONFIGS / f"{name}.yaml", "--out", out, *overrides(args))
        call("plot", "--csv", out / "results.csv", "--kind", "reward-trajectory",
             "--out", out / "reward-trajectory.svg")
        show(out / "summary.txt")
