"""Command-line front end.

One binary, four subcommands: `detect` runs a pipeline over a flow (or
dense) CSV, `simulate` writes a synthetic dataset, `roc` runs the Monte
Carlo ROC protocol, `fisher` runs the information study. Every command
writes machine-readable CSV plus a JSON manifest capturing the full
parameter set, so re-running a manifest reproduces the output byte for
byte. Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import __version__
from .evaluate import DEFAULT_THRESHOLDS, comprehensive, roc
from .hashrank import run_window as hashrank_window
from .hashrank import sample_coefficients
from .ingest import ParseError, iter_flow_csv, split_windows
from .model import DetectionMethod, MetricKind, WindowConfig
from .synth import SynthConfig, generate, read_dense_csv, write_dense_csv
from .toprank import run_window as toprank_window
from .fisher import BUILTIN_DENSITIES, estimate_info_max, estimate_info_sum

_METRICS = {m.value: m for m in MetricKind}
_METHODS = {m.value: m for m in DetectionMethod}


class _Parser(argparse.ArgumentParser):
    # usage errors exit 1 (argparse defaults to 2, reserved for data errors)
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class UsageError(Exception):
    pass


def _write_manifest(output: str, command: str, parameters: dict) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "parameters": parameters,
        "output": output,
    }
    with open(output + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _detect_config(args: argparse.Namespace) -> WindowConfig:
    return WindowConfig(
        delta=args.delta,
        bins_per_window=args.window,
        top_m=args.top,
        keep_mprime=args.keep,
        level_alpha=args.alpha,
        metric=_METRICS[args.metric],
    )


def cmd_detect(args: argparse.Namespace) -> int:
    method = _METHODS[args.method]
    if args.format == "dense" and args.metric != "syn":
        raise UsageError("dense input is already binned; --metric must stay at its default")
    cfg = _detect_config(args)
    if args.format == "dense":
        batch, _truth = read_dense_csv(args.input, bins=args.window)
        batches = [batch]
    else:
        policy = "raise" if args.errors == "abort" else "skip"
        records = iter_flow_csv(args.input, errors=policy)
        batches = split_windows(records, cfg)
    coeffs = None
    if method is DetectionMethod.HASHRANK:
        coeffs = sample_coefficients(args.seed, args.rows, args.buckets)
    rows = []
    for batch in batches:
        if method is DetectionMethod.TOPRANK:
            alarms = toprank_window(batch, cfg, budget=args.budget)
        elif method is DetectionMethod.HASHRANK:
            alarms = hashrank_window(batch, coeffs, cfg.level_alpha)
        else:
            alarms = comprehensive(batch, cfg.level_alpha)
        for a in alarms:
            rows.append(
                f"{a.window_index},{a.key},{a.method.value},"
                f"{a.p_value:.6g},{a.statistic:.6g},{a.change_bin}"
            )
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("window,key,method,p_value,statistic,change_bin\n")
        for row in rows:
            fh.write(row + "\n")
    _write_manifest(args.output, "detect", _namespace_params(args))
    print(f"wrote {len(rows)} alarms to {args.output}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = SynthConfig(
        dim=args.dim,
        bins=args.bins,
        pareto_shape=args.pareto_shape,
        pareto_scale=args.pareto_scale,
        change_rank=args.target_rank,
        change_bin=args.change_at,
        factor=args.factor,
        seed=args.seed,
    )
    ds = generate(cfg)
    write_dense_csv(ds, args.output)
    _write_manifest(args.output, "simulate", _namespace_params(args))
    print(f"wrote {int((ds.y > 0).sum())} nonzero cells to {args.output}")
    return 0


def _parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_roc(args: argparse.Namespace) -> int:
    methods = (
        [DetectionMethod.TOPRANK, DetectionMethod.HASHRANK, DetectionMethod.COMPREHENSIVE]
        if args.method == "all"
        else [_METHODS[args.method]]
    )
    thresholds = (
        _parse_float_list(args.thresholds)
        if args.thresholds
        else list(DEFAULT_THRESHOLDS)
    )
    cfg = SynthConfig(
        dim=args.dim,
        bins=args.bins,
        pareto_shape=args.pareto_shape,
        pareto_scale=args.pareto_scale,
        change_rank=args.target_rank,
        change_bin=args.change_at,
        factor=args.factor,
        seed=args.seed,
    )
    lines = []
    for method in methods:
        points = roc(
            cfg,
            method,
            args.runs,
            thresholds,
            budget=args.budget,
            top_m=args.top,
            l_rows=args.rows,
            k_buckets=args.buckets,
            threads=args.threads,
        )
        for p in points:
            lines.append(
                f"{method.value},{p.threshold:.6g},{p.fa_rate:.6g},{p.det_rate:.6g}"
            )
    # random-classifier reference line (detects like it false-alarms)
    for t in thresholds:
        lines.append(f"random,{t:.6g},{t:.6g},{t:.6g}")
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("method,threshold,fa_rate,det_rate\n")
        for line in lines:
            fh.write(line + "\n")
    params = _namespace_params(args)
    params["thresholds_used"] = thresholds
    _write_manifest(args.output, "roc", params)
    print(f"wrote {len(lines)} roc points to {args.output}")
    return 0


def cmd_fisher(args: argparse.Namespace) -> int:
    if args.density not in BUILTIN_DENSITIES:
        raise UsageError(
            f"unknown density {args.density!r}; built-ins: {sorted(BUILTIN_DENSITIES)}"
        )
    density = BUILTIN_DENSITIES[args.density]
    dims = _parse_int_list(args.dims)
    if not dims:
        raise UsageError("--dims must list at least one dimension")
    lines = []
    for i, dim in enumerate(dims):
        est_max = estimate_info_max(
            density, args.theta, dim, n_mc=args.mc, seed=args.seed + i
        )
        est_sum = estimate_info_sum(
            density, args.theta, dim, grid_n=args.grid, dtheta=args.dtheta_frac * args.theta
        )
        for est in (est_max, est_sum):
            lines.append(
                f"{est.method.value},{est.dim},{est.theta:.6g},"
                f"{est.value:.8g},{est.target:.8g}"
            )
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("method,D,theta,estimate,target\n")
        for line in lines:
            fh.write(line + "\n")
    _write_manifest(args.output, "fisher", _namespace_params(args))
    print(f"wrote {len(lines)} estimates to {args.output}")
    return 0


def _namespace_params(args: argparse.Namespace) -> dict:
    skip = {"func", "command"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowrank", description=__doc__)
    parser.add_argument("--version", action="version", version=f"flowrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="run a detection pipeline over a CSV")
    d.add_argument("--input", required=True, help="flow CSV (or dense CSV with --format dense)")
    d.add_argument("--output", default="alarms.csv")
    d.add_argument("--format", choices=("flow", "dense"), default="flow")
    d.add_argument("--metric", choices=sorted(_METRICS), default="syn")
    d.add_argument("--method", choices=sorted(_METHODS), default="toprank")
    d.add_argument("--delta", type=float, default=1.0, help="bin length in seconds")
    d.add_argument("--window", type=int, default=60, help="bins per observation window")
    d.add_argument("--top", type=int, default=10, help="per-bin filtering depth M")
    d.add_argument("--keep", type=int, default=1, help="candidate rank depth M'")
    d.add_argument("--alpha", type=float, default=1e-3, help="p-value alarm threshold")
    d.add_argument("--budget", type=int, default=None, help="fixed candidate budget (overrides --keep)")
    d.add_argument("--rows", type=int, default=8, help="sketch rows L")
    d.add_argument("--buckets", type=int, default=17, help="sketch buckets K")
    d.add_argument("--seed", type=int, default=0, help="hash coefficient seed")
    d.add_argument("--errors", choices=("abort", "skip"), default="abort")
    d.add_argument("--threads", type=int, default=1)
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate", help="write a synthetic dataset as dense CSV")
    s.add_argument("--output", default="dataset.csv")
    s.add_argument("--dim", type=int, default=1000)
    s.add_argument("--bins", type=int, default=60)
    s.add_argument("--change-at", type=int, default=35, dest="change_at")
    s.add_argument("--factor", type=float, default=7.0)
    s.add_argument("--target-rank", type=int, default=500, dest="target_rank")
    s.add_argument("--pareto-shape", type=float, default=2.5, dest="pareto_shape")
    s.add_argument("--pareto-scale", type=float, default=0.72, dest="pareto_scale")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("roc", help="Monte Carlo ROC evaluation on synthetic data")
    r.add_argument("--output", default="roc.csv")
    r.add_argument("--method", choices=sorted(_METHODS) + ["all"], default="all")
    r.add_argument("--runs", type=int, default=100)
    r.add_argument("--dim", type=int, default=1000)
    r.add_argument("--bins", type=int, default=60)
    r.add_argument("--change-at", type=int, default=35, dest="change_at")
    r.add_argument("--factor", type=float, default=7.0)
    r.add_argument("--target-rank", type=int, default=500, dest="target_rank")
    r.add_argument("--pareto-shape", type=float, default=2.5, dest="pareto_shape")
    r.add_argument("--pareto-scale", type=float, default=0.72, dest="pareto_scale")
    r.add_argument("--budget", type=int, default=136, help="series budget for record filtering")
    r.add_argument("--top", type=int, default=50, help="filtering depth M in budget mode")
    r.add_argument("--rows", type=int, default=8)
    r.add_argument("--buckets", type=int, default=17)
    r.add_argument("--thresholds", default=None, help="comma-separated p-value grid")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_roc)

    f = sub.add_parser("fisher", help="information study of max vs sum reduction")
    f.add_argument("--output", default="fisher.csv")
    f.add_argument("--theta", type=float, default=0.5)
    f.add_argument("--dims", default="50,200,800", help="comma-separated dimensions")
    f.add_argument("--density", default="beta33")
    f.add_argument("--mc", type=int, default=200_000, help="Monte Carlo draws for the max")
    f.add_argument("--grid", type=int, default=1 << 17, help="FFT grid size for the sum")
    f.add_argument("--dtheta-frac", type=float, default=1e-4, dest="dtheta_frac")
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fisher)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"flowrank: error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, OSError, ValueError) as exc:
        print(f"flowrank: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
