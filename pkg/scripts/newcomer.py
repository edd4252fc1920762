"""A neural newcomer entering a market run by a converged tabular incumbent.

Scenarios: stationary incumbent, collusion-shaped newcomer reward, an
incumbent that temporarily switches to a high price, and a cold-start
newcomer without offline data (compare its periods_to_95pct with the
stationary run).
"""

from pathlib import Path

from algocollusion.harness.presets import NEWCOMER_KINDS

from _common import call, overrides, parser, show

if __name__ == "__main__":
    p = parser(__doc__.splitlines()[0], "out/newcomer")
    p.add_argument("--presets", nargs="+", default=list(NEWCOMER_KINDS), choices=NEWCOMER_KINDS)
    args = p.parse_args()
    for kind in args.presets:
        out = Path(args.out) / kind
        call("dual-buffer", "--preset", kind, "--out", out, *overrides(args))
        call("plot", "--csv", out / "results.csv", "--kind", "dual-buffer-timeline",
             "--out", out / "timeline.svg")
        show(out / "summary.txt")
