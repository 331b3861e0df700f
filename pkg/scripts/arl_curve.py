"""Average run length of scalar NEWMA under a Gaussian null, against tau.

Compares the grid Markov chain, its two-grid extrapolation and plain Monte
Carlo. Writes arl.csv (and arl.png when matplotlib is available).

    python scripts/arl_curve.py --out results/arl
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from _common import out_dir, pyplot, write_rows
from newma.theory import ArlConfig, arl_markov, arl_markov_extrapolated, arl_monte_carlo, gaussian_cdf


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--big-lambda", type=float, default=0.2)
    ap.add_argument("--small-lambda", type=float, default=0.1)
    ap.add_argument("--eps", type=float, default=0.02)
    ap.add_argument("--taus", default="0.1,0.15,0.2,0.25,0.3,0.35,0.4")
    ap.add_argument("--runs", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/arl")
    args = ap.parse_args()

    out = out_dir(args.out)
    rows = []
    for i, tau in enumerate(float(v) for v in args.taus.split(",")):
        t0 = time.perf_counter()
        cfg = ArlConfig(gaussian_cdf, args.big_lambda, args.small_lambda, tau, args.eps)
        mc = arl_monte_carlo(
            args.big_lambda, args.small_lambda, tau, lambda rng, n: rng.standard_normal(n), runs=args.runs, seed=args.seed + i
        )
        row = {
            "tau": tau,
            "markov": arl_markov(cfg),
            "markov_extrapolated": arl_markov_extrapolated(cfg),
            "monte_carlo": mc.mean,
            "stderr": mc.stderr,
        }
        row["markov_rel_gap"] = row["markov"] / mc.mean - 1
        row["extrapolated_rel_gap"] = row["markov_extrapolated"] / mc.mean - 1
        rows.append(row)
        print(
            f"tau={tau:.3f} markov={row['markov']:.3f} extrap={row['markov_extrapolated']:.3f} "
            f"mc={mc.mean:.3f}+-{mc.stderr:.3f} ({time.perf_counter() - t0:.1f}s)"
        )
    write_rows(out / "arl.csv", rows)

    plt = pyplot()
    if plt is not None:
        taus = np.array([r["tau"] for r in rows])
        fig, ax = plt.subplots(figsize=(5, 3.5))
        ax.errorbar(taus, [r["monte_carlo"] for r in rows], yerr=[2 * r["stderr"] for r in rows], fmt="o", label="Monte Carlo")
        ax.plot(taus, [r["markov"] for r in rows], "-", label=f"Markov chain, eps={args.eps}")
        ax.plot(taus, [r["markov_extrapolated"] for r in rows], "--", label="two-grid extrapolation")
        ax.set_yscale("log")
        ax.set_xlabel("threshold tau")
        ax.set_ylabel("average run length")
        ax.legend()
        fig.tight_layout()
        fig.savefig(out / "arl.png", dpi=150)


if __name__ == "__main__":
    main()
