"""Per-step wall time of NEWMA, sliding window and Scan-B as the window grows.

NEWMA keeps two feature vectors whatever the window, the sliding window
keeps 2B of them, and Scan-B evaluates kernels against its whole buffer.
Writes timing.csv and timing.png.

    python scripts/timing.py --out results/timing
"""

from __future__ import annotations

import argparse
from dataclasses import asdict

import numpy as np

from _common import out_dir, pyplot, write_rows
from newma.calibration import choose_forgetting_factors
from newma.detectors import Newma, ScanB, SlidingWindow
from newma.evaluation import benchmark_runtime
from newma.feature_map import FeatureMapSpec, build_feature_map


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--d", type=int, default=50)
    ap.add_argument("--m", type=int, default=1000)
    ap.add_argument("--windows", default="50,100,250,400,500")
    ap.add_argument("--n-steps", type=int, default=4000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--out", default="results/timing")
    args = ap.parse_args()

    out = out_dir(args.out)
    d = args.d
    sigma = float(np.sqrt(2.0 * d))
    fmap = build_feature_map(FeatureMapSpec("rff", d, m=args.m, sigma=sigma))

    def newma(d, B):
        return Newma(*choose_forgetting_factors(B), fmap)

    factories = {
        "newma": newma,
        "sw": lambda d, B: SlidingWindow(B, fmap),
        "scanb": lambda d, B: ScanB(B, sigma, d),
    }
    windows = [int(v) for v in args.windows.split(",")]
    cells = benchmark_runtime(
        factories,
        [d],
        windows,
        n_steps=args.n_steps + 4 * max(windows),
        repeats=args.repeats,
        warmup=lambda algo, B: {"scanb": 4 * B, "sw": 2 * B}.get(algo, 0),
    )
    rows = [asdict(c) for c in cells]
    write_rows(out / "timing.csv", rows)
    for r in rows:
        print(f"{r['algo']:6s} B={r['B']:4d} {1e6 * r['median_step_seconds']:9.1f} us/step")

    plt = pyplot()
    if plt is not None:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for algo in factories:
            sel = [r for r in rows if r["algo"] == algo]
            ax.plot([r["B"] for r in sel], [1e6 * r["median_step_seconds"] for r in sel], "o-", label=algo)
        ax.set_xlabel("window size B")
        ax.set_ylabel("median time per step (us)")
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "timing.png", dpi=150)


if __name__ == "__main__":
    main()
