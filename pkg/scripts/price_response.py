"""Forced-price shocks applied to converged duopolies.

For each preset, agent 0 is forced for one period (or permanently for
"nash") right after convergence; the chart shows the median price paths.
"""

from pathlib import Path

from algocollusion.harness.presets import RESPONSE_KINDS

from _common import call, overrides, parser, show

if __name__ == "__main__":
    p = parser(__doc__.splitlines()[0], "out/response")
    p.add_argument("--presets", nargs="+", default=list(RESPONSE_KINDS), choices=RESPONSE_KINDS)
    args = p.parse_args()
    for kind in args.presets:
        out = Path(args.out) / kind
        call("respond", "--preset", kind, "--out", out, *overrides(args))
        call("plot", "--csv", out / "results.csv", "--kind", "price-response", "--out", out)
        show(out / "summary.txt")
