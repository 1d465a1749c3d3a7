"""Command-line interface.

Every subcommand prints one JSON object on stdout and a short human
summary on stderr.  Exit status: 0 on success, 2 on usage or input
errors, 3 on numeric failures and timeouts.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bench import load_config, ratio_report, run_bench, write_csv
from .bounds import BoundKind, deep_bound
from .errors import (
    MatrixParseError,
    MatrixTooLargeError,
    MemoryBudgetError,
    NestingFailure,
    NumericOverflowError,
    TrialBudgetExceeded,
)
from .estimator import EstimatorConfig, Scheme, estimate
from .exact import EXACT_MAX_N, log_permanent_exact
from .gg import SAMPLE_CAP, gg_estimate
from .matrix import InstanceClass, InstanceSpec, generate, load_matrix, save_matrix
from .preprocess import ds_pipeline
from .sampler import SamplerConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _emit(payload: dict, summary: str) -> None:
    print(json.dumps(payload, allow_nan=True))
    print(summary, file=sys.stderr)


def _log_or_none(x) -> Optional[float]:
    return None if x.is_zero() else x.log


def cmd_exact(args) -> int:
    a = load_matrix(args.file, args.format)
    p = log_permanent_exact(a, args.max_n)
    _emit({"permanent": p.value, "log_permanent": _log_or_none(p), "n": a.shape[0]},
          f"per = {p.value:.12g} (n = {a.shape[0]})")
    return EXIT_OK


def cmd_bound(args) -> int:
    a = load_matrix(args.file, args.format)
    db = deep_bound(a, args.depth, args.kind)
    v = db.value
    _emit({"kind": db.kind.value, "depth": args.depth, "log_value": _log_or_none(v), "value": v.value},
          f"U_{args.depth}^{db.kind.value.upper()} = {v.value:.12g}")
    return EXIT_OK


def cmd_preprocess(args) -> int:
    a = load_matrix(args.file, args.format)
    res = ds_pipeline(a, args.iterations)
    save_matrix(res.matrix, args.out)
    sidecar = args.out + ".json"
    info = {"source": args.file, "out": args.out, "log_scale": res.log_scale,
            "zero_permanent": res.zero_permanent, "kept_entries": int(res.support_mask.sum())}
    with open(sidecar, "w") as fh:
        json.dump(info, fh, indent=2)
    info["sidecar"] = sidecar
    _emit(info, f"wrote {args.out}; log scale {res.log_scale:.6g}")
    return EXIT_OK


def _sampler_config(args) -> SamplerConfig:
    return SamplerConfig(kind=args.kind, depth=args.depth, seed=args.seed)


def cmd_estimate(args) -> int:
    a = load_matrix(args.file, args.format)
    cfg = EstimatorConfig(args.eps, args.delta, args.scheme)
    rep = estimate(a, cfg, _sampler_config(args), preprocess=args.ds, trial_budget=args.trial_budget,
                   time_limit=args.time_limit, threads=args.threads)
    _emit(rep.to_dict(),
          f"per ~ {rep.value:.6g} ({rep.scheme.value}, k = {rep.accepted}, trials = {rep.total_trials}, "
          f"{rep.wall_time:.3g} s)")
    return EXIT_OK


def cmd_gg(args) -> int:
    a = load_matrix(args.file, args.format)
    rep = gg_estimate(a, args.variant, args.eps, args.delta, np.random.default_rng(args.seed),
                      sample_cap=args.sample_cap, time_limit=args.time_limit)
    _emit(rep.to_dict(), f"per ~ {rep.estimate:.6g} ({rep.total_samples} draws, {rep.wall_time:.3g} s)")
    return EXIT_OK


def cmd_gen(args) -> int:
    spec = InstanceSpec(InstanceClass(args.cls), n=args.n, p=args.p, seed=args.seed)
    a = generate(spec)
    save_matrix(a, args.out, args.format)
    _emit({"instance_id": spec.instance_id, "n": args.n, "out": args.out}, f"wrote {spec.instance_id} to {args.out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.ratio_report:
        rep = ratio_report(n=args.n, p=args.p, seed=args.seed)
        ok = all(e["finite"] and e["ratio_at_least_one"] for e in rep["entries"])
        rep["checks_passed"] = ok
        lines = [f"d={e['d']}: U/per = {e['ratio']:.4g}, bound {e['asymptotic_bound']:.4g}" for e in rep["entries"]]
        _emit(rep, "\n".join(lines))
        return EXIT_OK if ok else EXIT_NUMERIC
    if not args.config:
        raise argparse.ArgumentTypeError("bench needs --config or --ratio-report")
    configs, out = load_config(args.config)
    out = args.out or out

    def show(row):
        print(f"{row.instance_id:>24} {row.scheme:>14} ERT {row.ert_seconds:10.4g} s  {row.status}",
              file=sys.stderr)

    rows = run_bench(configs, progress=show)
    if out:
        write_csv(rows, out)
    print(json.dumps({"rows": len(rows), "csv": out,
                      "timeouts": sum(r.status == "timeout" for r in rows)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deepperm", description="Permanents of nonnegative matrices.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def with_file(sp):
        sp.add_argument("file")
        sp.add_argument("--format", choices=["matrix-market", "dense-text"], default=None)
        return sp

    sp = with_file(sub.add_parser("exact", help="exact permanent (Glynn, Gray code)"))
    sp.add_argument("--max-n", type=int, default=EXACT_MAX_N)
    sp.set_defaults(func=cmd_exact)

    sp = with_file(sub.add_parser("bound", help="depth-d upper bound"))
    sp.add_argument("--kind", type=BoundKind.parse, default=BoundKind.HUBER_LAW)
    sp.add_argument("--depth", type=int, default=0)
    sp.set_defaults(func=cmd_bound)

    sp = with_file(sub.add_parser("preprocess", help="support filter + Sinkhorn + row-max division"))
    sp.add_argument("--out", required=True)
    sp.add_argument("--iterations", type=int, default=None)
    sp.set_defaults(func=cmd_preprocess)

    sp = with_file(sub.add_parser("estimate", help="(eps, delta)-approximation by rejection sampling"))
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--scheme", type=Scheme.parse, default=Scheme.GBAS_EXACT_K)
    sp.add_argument("--kind", type=BoundKind.parse, default=BoundKind.HUBER_LAW)
    sp.add_argument("--depth", type=int, default=0)
    sp.add_argument("--ds", action="store_true", help="apply DS preprocessing first")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trial-budget", type=int, default=10**8)
    sp.add_argument("--time-limit", type=float, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.set_defaults(func=cmd_estimate)

    sp = with_file(sub.add_parser("gg", help="Godsil-Gutman determinant estimator"))
    sp.add_argument("--variant", default="real")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--delta", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sample-cap", type=int, default=SAMPLE_CAP)
    sp.add_argument("--time-limit", type=float, default=None)
    sp.set_defaults(func=cmd_gg)

    sp = sub.add_parser("gen", help="generate a benchmark instance")
    sp.add_argument("--class", dest="cls", required=True,
                    choices=[c.value for c in InstanceClass if c is not InstanceClass.FILE])
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--p", type=float, default=None)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--format", choices=["matrix-market", "dense-text"], default=None)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("bench", help="ERT benchmark grid or the random-matrix ratio report")
    sp.add_argument("--config", default=None, help="grid file (.json or .toml)")
    sp.add_argument("--out", default=None, help="CSV path (overrides the config's output)")
    sp.add_argument("--ratio-report", action="store_true")
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--p", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (NumericOverflowError, MemoryBudgetError, NestingFailure, TrialBudgetExceeded,
            TimeoutError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, MatrixParseError, MatrixTooLargeError, argparse.ArgumentTypeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
