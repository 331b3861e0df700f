"""Detection on a piecewise Gaussian-mixture stream: NEWMA, sliding window and Scan-B.

Every detector runs once with the adaptive threshold; its statistic trace is
then re-scored under a sweep of fixed thresholds. Writes operating_points.json,
one tradeoff_<algo>.csv per detector and tradeoff.png.

    python scripts/gmm_benchmark.py --out results/gmm
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from _common import out_dir, pyplot, write_json, write_rows
from newma.datagen import GmmStreamSpec, generate_gmm_stream
from newma.evaluation import score, sweep_thresholds, tradeoff_rows
from newma.pipeline import RunConfig, run_config


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--d", type=int, default=20)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--n-changes", type=int, default=50)
    ap.add_argument("--window", type=int, default=150)
    ap.add_argument("--features", default="rff", choices=["rff", "fastfood"])
    ap.add_argument("--threshold", default="adaptive:0.01,1.64")
    ap.add_argument("--algos", default="newma,sw,scanb")
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="results/gmm")
    args = ap.parse_args()

    out = out_dir(args.out)
    spec = GmmStreamSpec(d=args.d, k=args.k, n=args.n, n_changes=args.n_changes, seed=args.seed)
    X, cps = generate_gmm_stream(spec)
    newma_cfg = None
    points, curves = {}, {}
    for algo in args.algos.split(","):
        t0 = time.perf_counter()
        kw = {}
        if algo == "sw" and newma_cfg is not None:
            kw = {"m": newma_cfg.m, "sigma": newma_cfg.sigma}
        cfg, trace = run_config(
            RunConfig(algo, args.d, window=args.window, features=args.features, threshold=args.threshold, seed=args.seed, **kw),
            X,
        )
        if algo == "newma":
            newma_cfg = cfg
        report = score(trace.flags, cps, spec.n)
        stats = trace.stat[trace.armed & np.isfinite(trace.stat)]
        taus = np.unique(np.quantile(stats, np.linspace(0, 1, 100)))
        curves[algo] = tradeoff_rows(sweep_thresholds(trace.stat, cps, spec.n, taus, trace.armed))
        points[algo] = {"config": cfg.to_dict(), "report": report.to_dict(with_records=False), "seconds": time.perf_counter() - t0}
        write_rows(out / f"tradeoff_{algo}.csv", curves[algo])
        print(
            f"{algo:6s} FA/change {report.fa_per_change:.3f} missed {report.missed_rate:.0%} "
            f"EDD {report.edd} ({points[algo]['seconds']:.1f}s)"
        )
    write_json(out / "operating_points.json", {"stream": spec.to_dict(), "detectors": points})

    plt = pyplot()
    if plt is not None:
        fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
        for algo, rows in curves.items():
            fa = [r["fa_per_change"] for r in rows]
            line = axes[0].plot(fa, [r["missed_rate"] for r in rows], label=algo)[0]
            axes[1].plot(fa, [np.nan if r["edd"] is None else r["edd"] for r in rows], color=line.get_color())
            op = points[algo]["report"]
            axes[0].plot(op["fa_per_change"], op["missed_rate"], "*", ms=12, color=line.get_color())
            axes[1].plot(op["fa_per_change"], op["edd"] or np.nan, "*", ms=12, color=line.get_color())
        for ax, label in zip(axes, ("missed detection rate", "expected detection delay")):
            ax.set_xscale("symlog", linthresh=0.1)
            ax.set_xlabel("false alarms per change")
            ax.set_ylabel(label)
        axes[0].legend()
        fig.tight_layout()
        fig.savefig(out / "tradeoff.png", dpi=150)


if __name__ == "__main__":
    main()
