"""Command-line entry point: ``newma <subcommand> ...``.

Exit codes: 0 success, 1 configuration error, 2 I/O or input error,
3 numerical error. Failures print one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Iterator, TextIO

import numpy as np

from . import __version__
from .calibration import auto_calibrate, choose_forgetting_factors
from .datagen import GmmStreamSpec, generate_gmm_stream
from .detectors import Newma, ScanB, SlidingWindow, iter_stream
from .errors import ConfigurationError, InputError, NewmaError, NumericalError
from .evaluation import score, sweep_thresholds, time_steps, tradeoff_rows
from .feature_map import FeatureMapSpec, build_feature_map
from .pipeline import ALGORITHMS, RunConfig, Trace, build_detector, resolve
from .theory import (
    ArlConfig,
    NullLawConfig,
    arl_markov,
    arl_markov_extrapolated,
    arl_monte_carlo,
    gaussian_cdf,
    null_law_toy_experiment,
)

EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 1, 2, 3
VOLATILE_KEYS = ("created", "wall_seconds", "hash")


class UsageError(ConfigurationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits 2 by default; usage problems are config errors
        raise UsageError(message)


# ---------------------------------------------------------------- file helpers


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def manifest_hash(manifest: dict) -> str:
    stable = {k: v for k, v in manifest.items() if k not in VOLATILE_KEYS}
    return hashlib.sha256(json.dumps(stable, sort_keys=True).encode()).hexdigest()


def write_manifest(path: str | Path, command: str, config: dict, inputs: Iterable, outputs: Iterable, started: float) -> dict:
    """Write the provenance record of one invocation next to its outputs.

    ``hash`` covers everything except the wall-clock fields, so reruns of
    the same configuration on the same inputs reproduce it.
    """
    manifest = {
        "tool": "newma",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs if p is not None],
        "outputs": [{"path": str(p), "sha256": sha256_file(p)} for p in outputs],
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_seconds": round(time.perf_counter() - started, 6),
    }
    manifest["hash"] = manifest_hash(manifest)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def manifest_path(out: str | Path) -> Path:
    return Path(f"{out}.manifest.json")


def _open_input(path: str | None) -> TextIO:
    if path is None or path == "-":
        return sys.stdin
    return open(path, newline="")


def iter_csv_samples(fh: TextIO, header: bool = False) -> Iterator[np.ndarray]:
    """Rows of a numeric CSV as float vectors; blank lines are skipped."""
    reader = csv.reader(fh)
    if header:
        next(reader, None)
    width = None
    for lineno, row in enumerate(reader, start=2 if header else 1):
        if not row:
            continue
        try:
            x = np.array([float(v) for v in row])
        except ValueError as exc:
            raise InputError(f"line {lineno}: {exc}") from None
        if width is None:
            width = x.size
        elif x.size != width:
            raise InputError(f"line {lineno}: expected {width} columns, got {x.size}")
        yield x


def write_samples_csv(path: str | Path, X: np.ndarray) -> None:
    # 17 significant digits round-trip doubles exactly
    np.savetxt(path, X, delimiter=",", fmt="%.17g")


def read_changes(path: str | Path) -> list[int]:
    with open(path) as fh:
        return [int(line) for line in fh if line.strip()]


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            lo, hi, step = (float(v) for v in text.split(":"))
            if step <= 0 or hi < lo:
                raise ValueError("need step > 0 and hi >= lo")
            count = int(round((hi - lo) / step)) + 1
            return np.round(lo + step * np.arange(count), 12)
        return np.array([float(v) for v in text.split(",") if v])
    except ValueError as exc:
        raise ConfigurationError(f"bad grid {text!r}: {exc}") from None


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise ConfigurationError(f"bad integer list {text!r}: {exc}") from None


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    started = time.perf_counter()
    spec = GmmStreamSpec(
        d=args.d,
        k=args.k,
        n=args.n,
        n_changes=args.n_changes,
        seed=args.seed,
        mean_scale=args.mean_scale,
        wishart_dof=args.wishart_dof,
        dirichlet_alpha=args.dirichlet_alpha,
        identity_covariance=args.identity_covariance,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X, cps = generate_gmm_stream(spec)
    paths = synth_outputs(out)
    write_samples_csv(paths["samples"], X)
    paths["changes"].write_text("".join(f"{c}\n" for c in cps))
    paths["metadata"].write_text(json.dumps({"spec": spec.to_dict(), "n_samples": spec.n_samples}, indent=2, sort_keys=True) + "\n")
    write_manifest(out / "manifest.json", "synth", spec.to_dict(), [], paths.values(), started)
    return 0


def synth_outputs(out: Path) -> dict[str, Path]:
    return {"samples": out / "samples.csv", "changes": out / "changes.txt", "metadata": out / "metadata.json"}


# ---------------------------------------------------------------- run


def _run_config_from_args(args, d: int) -> RunConfig:
    base: dict = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    flags = {
        "algo": args.algo,
        "window": args.window,
        "big_lambda": args.big_lambda,
        "small_lambda": args.small_lambda,
        "m": args.m,
        "sigma": args.sigma,
        "features": args.features,
        "threshold": args.threshold,
        "n_blocks": args.n_blocks,
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    base["seed"] = args.seed
    base["d"] = d
    base.setdefault("algo", "newma")
    if args.auto_calibrate:
        if args.big_lambda is not None or args.small_lambda is not None:
            raise ConfigurationError("--auto-calibrate conflicts with explicit forgetting factors")
        base.pop("big_lambda", None)
        base.pop("small_lambda", None)
    elif base.get("algo") == "newma" and (base.get("big_lambda") is None or base.get("small_lambda") is None):
        raise ConfigurationError("newma needs --big-lambda and --small-lambda, or --auto-calibrate with --window")
    try:
        return RunConfig(**base)
    except TypeError as exc:
        raise ConfigurationError(f"bad run configuration: {exc}") from None


def run_detector_on_rows(config: RunConfig, rows: Iterator[np.ndarray]) -> tuple[RunConfig, Iterator]:
    """Resolve ``config`` on a ``2B``-sample head buffer and stream everything."""
    head = list(itertools.islice(rows, config.calibration_size)) if config.needs_data() else []
    if config.needs_data() and len(head) < 2:
        raise InputError("stream too short to calibrate the bandwidth")
    resolved = resolve(config, np.array(head) if head else None)
    det = build_detector(resolved)
    return resolved, iter_stream(det, itertools.chain(head, rows))


def _first_row(rows: Iterator[np.ndarray]) -> tuple[int, Iterator[np.ndarray]]:
    try:
        first = next(rows)
    except StopIteration:
        raise InputError("input stream is empty") from None
    return first.size, itertools.chain([first], rows)


def cmd_run(args) -> int:
    started = time.perf_counter()
    fh = _open_input(args.input)
    try:
        d, rows = _first_row(iter_csv_samples(fh, args.header))
        config = _run_config_from_args(args, d)
        resolved, results = run_detector_on_rows(config, rows)
        to_stdout = args.out == "-"
        sink = sys.stdout if to_stdout else open(args.out, "w")
        try:
            for r in results:
                sink.write(json.dumps(r.to_record()) + "\n")
        finally:
            if not to_stdout:
                sink.close()
    finally:
        if fh is not sys.stdin:
            fh.close()
    if not to_stdout:
        inputs = [args.input] if args.input not in (None, "-") else []
        write_manifest(manifest_path(args.out), "run", resolved.to_dict(), inputs, [args.out], started)
    return 0


# ---------------------------------------------------------------- eval


def read_trace(path: str | Path) -> Trace:
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    return Trace.from_records(records)


def default_tau_grid(trace: Trace, size: int = 50) -> np.ndarray:
    s = trace.stat[trace.armed & np.isfinite(trace.stat)]
    if s.size == 0:
        return np.zeros(1)
    return np.unique(np.quantile(s, np.linspace(0.0, 1.0, size)))


def evaluate_trace(trace: Trace, changes: list[int], n: int, taus: np.ndarray | None) -> tuple[dict, list[dict]]:
    """The trace's own operating point plus a fixed-threshold sweep."""
    point = score(trace.flags, changes, n)
    taus = default_tau_grid(trace) if taus is None else taus
    sweep = sweep_thresholds(trace.stat, changes, n, taus, trace.armed)
    report = {"operating_point": point.to_dict(), "n_steps": int(trace.stat.size), "segment_length": n}
    return report, tradeoff_rows(sweep)


def write_report(report_path: Path, curve_path: Path, report: dict, rows: list[dict]) -> None:
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with open(curve_path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["tau", "fa_per_change", "missed_rate", "edd"])
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if v is None else repr(float(v))) for k, v in row.items()})


def _curve_path(out: Path, curve: str | None) -> Path:
    return Path(curve) if curve else out.with_suffix(".curve.csv")


def cmd_eval(args) -> int:
    started = time.perf_counter()
    trace = read_trace(args.trace)
    changes = read_changes(args.changes)
    taus = parse_grid(args.tau_grid) if args.tau_grid else None
    report, rows = evaluate_trace(trace, changes, args.n, taus)
    out = Path(args.out)
    curve = _curve_path(out, args.curve)
    write_report(out, curve, report, rows)
    config = {"n": args.n, "tau_grid": args.tau_grid, "seed": args.seed}
    write_manifest(manifest_path(out), "eval", config, [args.trace, args.changes], [out, curve], started)
    return 0


# ---------------------------------------------------------------- bench-pipeline


def cmd_bench_pipeline(args) -> int:
    """``synth``, ``run`` and ``eval`` chained in memory with the same settings."""
    started = time.perf_counter()
    spec = GmmStreamSpec(
        d=args.d,
        k=args.k,
        n=args.n,
        n_changes=args.n_changes,
        seed=args.seed,
        mean_scale=args.mean_scale,
        wishart_dof=args.wishart_dof,
        dirichlet_alpha=args.dirichlet_alpha,
        identity_covariance=args.identity_covariance,
    )
    X, cps = generate_gmm_stream(spec)
    config = _run_config_from_args(args, spec.d)
    resolved, results = run_detector_on_rows(config, iter(X))
    trace = Trace.from_results(results)
    taus = parse_grid(args.tau_grid) if args.tau_grid else None
    report, rows = evaluate_trace(trace, cps, spec.n, taus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "report.json", out / "report.curve.csv", report, rows)
    config_out = {"synth": spec.to_dict(), "run": resolved.to_dict(), "tau_grid": args.tau_grid}
    write_manifest(out / "manifest.json", "bench-pipeline", config_out, [], [out / "report.json", out / "report.curve.csv"], started)
    return 0


# ---------------------------------------------------------------- calibrate


def cmd_calibrate(args) -> int:
    started = time.perf_counter()
    samples = None
    if args.input:
        with _open_input(args.input) as fh:
            samples = np.array(list(iter_csv_samples(fh, args.header)))
        if samples.size == 0:
            raise InputError("calibration input is empty")
    multiple = 1
    if args.features == "fastfood":
        if args.d is None and samples is None:
            raise ConfigurationError("fastfood calibration needs --d or --input")
        d = args.d if args.d is not None else samples.shape[1]
        multiple = FeatureMapSpec("fastfood", d, m=1, sigma=1.0).padded_dim
    cal = auto_calibrate(args.window, samples, scale=args.scale, seed=args.seed, multiple_of=multiple)
    text = json.dumps(cal.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
        return 0
    Path(args.out).write_text(text)
    config = {"window": args.window, "scale": args.scale, "features": args.features, "d": args.d, "seed": args.seed}
    write_manifest(manifest_path(args.out), "calibrate", config, [args.input] if args.input else [], [args.out], started)
    return 0


# ---------------------------------------------------------------- arl


def _null_distribution(name: str):
    if name == "gaussian":
        return gaussian_cdf, lambda rng, n: rng.standard_normal(n)
    if name == "uniform":
        half = 3**0.5

        def cdf(x):
            return np.clip((np.asarray(x) + half) / (2 * half), 0.0, 1.0)

        return cdf, lambda rng, n: rng.uniform(-half, half, n)
    raise ConfigurationError(f"unknown null distribution {name!r}")


def cmd_arl(args) -> int:
    started = time.perf_counter()
    cdf, sampler = _null_distribution(args.dist)
    taus = parse_grid(args.tau_grid)
    fields = ["tau", "arl_markov", "arl_mc", "stderr", "censored"]
    if args.extrapolate:
        fields.append("arl_markov_extrapolated")
    rows = []
    for i, tau in enumerate(taus):
        cfg = ArlConfig(cdf, args.big_lambda, args.small_lambda, float(tau), args.eps)
        mc = arl_monte_carlo(args.big_lambda, args.small_lambda, float(tau), sampler, runs=args.mc_runs, horizon=args.horizon, seed=args.seed + i)
        row = {"tau": float(tau), "arl_markov": arl_markov(cfg), "arl_mc": mc.mean, "stderr": mc.stderr, "censored": mc.censored}
        if args.extrapolate:
            row["arl_markov_extrapolated"] = arl_markov_extrapolated(cfg)
        rows.append(row)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out == "-":
        sys.stdout.write(buf.getvalue())
        return 0
    Path(args.out).write_text(buf.getvalue())
    config = {k: getattr(args, k) for k in ("dist", "big_lambda", "small_lambda", "tau_grid", "eps", "mc_runs", "horizon", "seed", "extrapolate")}
    write_manifest(manifest_path(args.out), "arl", config, [], [args.out], started)
    return 0


# ---------------------------------------------------------------- nulldist


def cmd_nulldist(args) -> int:
    started = time.perf_counter()
    exp = null_law_toy_experiment(args.big_lambda, args.small_lambda, args.n_eigen, args.n_sims, seed=args.seed, t=args.t)
    out = Path(args.out)
    np.savetxt(out, np.column_stack([exp.scaled_statistic, exp.law_samples]), delimiter=",", fmt="%.17g", header="scaled_statistic,law_sample", comments="")
    law = NullLawConfig(exp.eigenvalues, args.big_lambda / args.small_lambda)
    summary = {
        "ks_distance": exp.ks_distance,
        "empirical_mean": float(exp.scaled_statistic.mean()),
        "law_mean": law.mean,
        "G": law.G,
        "t": exp.t,
        "seed": exp.seed,
        "eigenvalues": exp.eigenvalues.tolist(),
    }
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    config = {k: getattr(args, k) for k in ("big_lambda", "small_lambda", "n_eigen", "n_sims", "t", "seed")}
    write_manifest(manifest_path(out), "nulldist", config, [], [out, summary_path], started)
    return 0


# ---------------------------------------------------------------- bench


def bench_detector(algo: str, d: int, B: int, m: int, features: str, seed: int):
    sigma = float(np.sqrt(2.0 * d))
    if algo == "scanb":
        return ScanB(B, sigma, d)
    if features == "fastfood":
        dp = FeatureMapSpec("fastfood", d, m=1, sigma=1.0).padded_dim
        m = dp * -(-m // dp)
    fmap = build_feature_map(FeatureMapSpec(features, d, m=m, sigma=sigma, seed=seed))
    if algo == "newma":
        big, small = choose_forgetting_factors(B)
        return Newma(big, small, fmap)
    if algo == "sw":
        return SlidingWindow(B, fmap)
    raise ConfigurationError(f"bench does not support {algo!r}")


def bench_warmup(algo: str, B: int) -> int:
    return {"scanb": 4 * B, "sw": 2 * B}.get(algo, 0)


def _bench_cell(cell: tuple) -> dict:
    algo, d, B, m, features, n_steps, repeats, seed = cell
    samples = np.random.default_rng(seed).standard_normal((n_steps + bench_warmup(algo, B), d))
    runs = [
        time_steps(lambda: bench_detector(algo, d, B, m, features, seed), samples, bench_warmup(algo, B))
        for _ in range(repeats)
    ]
    return {"algo": algo, "features": features, "d": d, "B": B, "m": m, "n_steps": n_steps, "repeats": repeats, "median_step_seconds": float(np.median(runs))}


def cmd_bench(args) -> int:
    started = time.perf_counter()
    if args.repeats < 3:
        raise ConfigurationError("--repeats must be >= 3")
    algos = [a for a in args.algos.split(",") if a]
    for a in algos:
        if a not in ("newma", "sw", "scanb"):
            raise ConfigurationError(f"bench does not support {a!r}")
    cells = [
        (a, d, B, args.m, args.features, args.n_steps, args.repeats, args.seed)
        for a in algos
        for d in parse_int_list(args.d_grid)
        for B in parse_int_list(args.B_grid)
    ]
    workers = max(1, int(os.environ.get("NEWMA_THREADS", "1") or 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_cell, cells))
    else:
        rows = [_bench_cell(c) for c in cells]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]) if rows else ["algo"], lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.out == "-":
        sys.stdout.write(buf.getvalue())
        return 0
    Path(args.out).write_text(buf.getvalue())
    config = {k: getattr(args, k) for k in ("algos", "d_grid", "B_grid", "m", "features", "n_steps", "repeats", "seed")}
    write_manifest(manifest_path(args.out), "bench", config, [], [args.out], started)
    return 0


# ---------------------------------------------------------------- parser


def _add_common(p: argparse.ArgumentParser, out_default: str) -> None:
    p.add_argument("--seed", type=int, default=0, help="root seed of every random draw (default 0)")
    p.add_argument("--out", default=out_default, help=f"output path (default {out_default})")


def _add_gmm(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=int, default=20, help="dimension")
    p.add_argument("--k", type=int, default=5, help="mixture components")
    p.add_argument("--n", type=int, default=1000, help="samples per segment")
    p.add_argument("--n-changes", type=int, default=50, help="number of change points")
    p.add_argument("--mean-scale", type=float, default=1.0, help="stdev of the component-mean draw")
    p.add_argument("--wishart-dof", type=float, default=None, help="inverse-Wishart dof (default d+10)")
    p.add_argument("--dirichlet-alpha", type=float, default=1.0, help="Dirichlet concentration of the weights")
    p.add_argument("--identity-covariance", action="store_true", help="fix every covariance to the identity")


def _add_detector(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run-configuration fields; flags override it")
    p.add_argument("--algo", choices=[a for a in ALGORITHMS if a != "ewma"], default=None, help="detector (default newma)")
    p.add_argument("--window", type=int, default=None, help="window size B")
    p.add_argument("--auto-calibrate", action="store_true", help="derive forgetting factors and m from --window")
    p.add_argument("--big-lambda", type=float, default=None, help="fast forgetting factor")
    p.add_argument("--small-lambda", type=float, default=None, help="slow forgetting factor")
    p.add_argument("--m", type=int, default=None, help="number of random features (default from the factors)")
    p.add_argument("--sigma", type=float, default=None, help="kernel bandwidth (default: median trick on the first 2B samples)")
    p.add_argument("--features", choices=["rff", "fastfood", "identity"], default=None, help="feature map (default rff)")
    p.add_argument("--threshold", default=None, help="fixed:<tau> or adaptive:<alpha>,<a> (default adaptive:0.01,1.64)")
    p.add_argument("--n-blocks", type=int, default=None, help="Scan-B reference blocks (default 3)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="newma", description="Online change-point detection with NEWMA and baselines.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a piecewise Gaussian-mixture stream")
    _add_gmm(p)
    _add_common(p, "synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="stream a CSV through a detector and write a JSONL trace")
    p.add_argument("--input", help="CSV of samples, one per row (default stdin)")
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    _add_detector(p)
    _add_common(p, "trace.jsonl")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a trace against true change points")
    p.add_argument("--trace", required=True, help="JSONL trace from `run`")
    p.add_argument("--changes", required=True, help="change-point file, one step index per line")
    p.add_argument("--n", type=int, required=True, help="segment length")
    p.add_argument("--tau-grid", default=None, help="fixed thresholds lo:hi:step or a,b,c (default: 50 quantiles of S_t)")
    p.add_argument("--curve", default=None, help="tradeoff CSV path (default <out>.curve.csv)")
    _add_common(p, "report.json")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-pipeline", help="synth, run and eval in one process")
    _add_gmm(p)
    _add_detector(p)
    p.add_argument("--tau-grid", default=None, help="as for eval")
    _add_common(p, "pipeline")
    p.set_defaults(func=cmd_bench_pipeline)

    p = sub.add_parser("calibrate", help="forgetting factors, feature count and bandwidth for a window size")
    p.add_argument("--window", type=int, required=True, help="window size B")
    p.add_argument("--d", type=int, default=None, help="input dimension (fastfood rounding)")
    p.add_argument("--input", default=None, help="training CSV for the median trick")
    p.add_argument("--header", action="store_true", help="skip the first CSV line")
    p.add_argument("--scale", type=float, default=0.25, help="multiplier of the feature-count rule")
    p.add_argument("--features", choices=["rff", "fastfood"], default="rff")
    _add_common(p, "-")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("arl", help="average run length: Markov chain against Monte Carlo")
    p.add_argument("--dist", choices=["gaussian", "uniform"], default="gaussian", help="null law of Psi(X) (unit variance)")
    p.add_argument("--big-lambda", type=float, default=0.2)
    p.add_argument("--small-lambda", type=float, default=0.1)
    p.add_argument("--tau-grid", default="0.05:0.5:0.05", help="lo:hi:step or a,b,c")
    p.add_argument("--eps", type=float, default=0.02, help="grid precision")
    p.add_argument("--mc-runs", type=int, default=1000)
    p.add_argument("--horizon", type=int, default=1_000_000, help="Monte-Carlo censoring time")
    p.add_argument("--extrapolate", action="store_true", help="add the eps-extrapolated Markov value")
    _add_common(p, "-")
    p.set_defaults(func=cmd_arl)

    p = sub.add_parser("nulldist", help="scaled statistic under the null against its limiting law")
    p.add_argument("--big-lambda", type=float, default=0.02)
    p.add_argument("--small-lambda", type=float, default=0.01)
    p.add_argument("--n-eigen", type=int, default=30)
    p.add_argument("--n-sims", type=int, default=1000)
    p.add_argument("--t", type=int, default=None, help="run length (default ceil((2/small) log(1/small)))")
    _add_common(p, "nulldist.csv")
    p.set_defaults(func=cmd_nulldist)

    p = sub.add_parser("bench", help="per-step timing over algorithms, dimensions and windows")
    p.add_argument("--algos", default="newma,scanb", help="comma list of newma, sw, scanb")
    p.add_argument("--d-grid", default="50")
    p.add_argument("--B-grid", default="50,100,400,500")
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--features", choices=["rff", "fastfood"], default="rff")
    p.add_argument("--n-steps", type=int, default=12000)
    p.add_argument("--repeats", type=int, default=3)
    _add_common(p, "-")
    p.set_defaults(func=cmd_bench)
    return parser


def _diagnose(kind: str, exc: BaseException) -> None:
    sys.stderr.write(json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)}) + "\n")


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (InputError, OSError) as exc:
        _diagnose("io", exc)
        return EXIT_IO
    except NumericalError as exc:
        _diagnose("numerical", exc)
        return EXIT_NUMERIC
    except (NewmaError, json.JSONDecodeError) as exc:
        _diagnose("configuration", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
