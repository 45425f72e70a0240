"""Command-line front end.

Subcommands: gen, approx, recursive, lsr, bench, audit, mc-norms.
--config loads defaults from a TOML or JSON file; explicit flags win.
Exit codes: 0 all assertions pass, 1 an acceptance check failed,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import bench, inputs as inp, lsr, matio, rangefinder as rf
from .rng import RngStream


def _load_config(path: str) -> dict:
    p = Path(path)
    raw = p.read_bytes()
    if p.suffix == ".json":
        cfg = json.loads(raw)
    else:
        cfg = tomllib.loads(raw.decode())
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: config must be a table/object at top level")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _read_input(path: str) -> np.ndarray:
    if path.endswith(".tsv"):
        return matio.read_tsv(path)
    return matio.read_matrix(path)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, default=str)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def _int_list(text: str) -> list:
    return [int(tok) for tok in text.replace(",", " ").split()]


# ---------------------------------------------------------------------------
# subcommands

def _cmd_gen(args) -> int:
    rng = RngStream(args.seed)
    if args.kind == "svd":
        M = inp.svd_spectrum_matrix(inp.SpectrumSpec(args.n, args.r,
                                                     tail=args.tail), rng)
    elif args.kind == "laplacian":
        M = inp.laplacian_matrix(args.n)
    elif args.kind == "fd":
        M = inp.finite_difference_inverse(args.preset)
    elif args.kind == "factor":
        m_rows = args.m if args.m is not None else args.n
        spec = inp.FactorGaussianSpec(m_rows, args.n, args.r,
                                      noise_norm=args.noise)
        M = inp.factor_gaussian(spec, rng)
    else:
        raise ValueError(f"unknown input kind {args.kind!r}")
    matio.write_matrix(args.out, M)
    _emit({"path": args.out, "rows": M.shape[0], "cols": M.shape[1],
           "kind": args.kind, "seed": args.seed}, None)
    return 0


def _cmd_approx(args) -> int:
    M = _read_input(args.input)
    rng = RngStream(args.seed)
    B = bench.build_multiplier(args.multiplier, M.shape[1], args.l, rng)
    res = rf.range_finder(M, B, args.tau, est=args.estimator)
    payload = {
        "status": res.status,
        "delta": res.delta,
        "tau": args.tau,
        "l_used": res.l_used,
        "basis_columns": res.Q.shape[1],
        "flops": {"additions": res.flops.additions,
                  "multiplications": res.flops.multiplications},
        "multiplier": args.multiplier,
        "seed": args.seed,
    }
    _emit(payload, args.out)
    return 0 if res.success else 1


def _cmd_recursive(args) -> int:
    M = _read_input(args.input)
    n = M.shape[1]
    rng = RngStream(args.seed)
    Bhat = bench.MULTIPLIER_RECIPES[args.multiplier](n, rng)
    if args.blocks:
        blocks = _int_list(args.blocks)
    else:
        width = args.block_size
        blocks = [width] * (n // width)
        if n % width:
            blocks.append(n % width)
    res = rf.recursive_range_finder(M, Bhat, blocks, args.tau,
                                    est=args.estimator)
    payload = {
        "status": res.status,
        "delta": res.delta,
        "tau": args.tau,
        "stage": res.stage,
        "l_used": res.l_used,
        "history": [{"stage": s, "l_used": l, "delta": d}
                    for s, l, d in res.history],
        "multiplier": args.multiplier,
        "seed": args.seed,
    }
    _emit(payload, args.out)
    return 0 if res.success else 1


def _cmd_lsr(args) -> int:
    k = args.k if args.k is not None else lsr.sketch_dimension(
        args.d, args.delta, args.xi)
    summary = lsr.residual_ratio_trial(args.m, args.d, k, args.kind,
                                       args.trials, RngStream(args.seed))
    lo, hi = 1.0 - args.xi, 1.0 + args.xi
    coverage = summary.coverage(lo, hi)
    payload = {
        "m": args.m, "d": args.d, "k": k, "kind": args.kind,
        "trials": args.trials, "seed": args.seed,
        "ratio_mean": summary.mean, "ratio_std": summary.std,
        "quantiles": summary.quantiles,
        "band": [lo, hi], "coverage": coverage,
        "coverage_target": args.coverage,
    }
    _emit(payload, args.out)
    return 0 if coverage >= args.coverage else 1


def _cmd_bench(args) -> int:
    report = bench.reproduce_table(args.table, scale=args.scale,
                                   trials=args.trials, base_seed=args.seed)
    out_base = args.out or f"table{args.table}"
    if args.format == "csv":
        data_path = Path(out_base).with_suffix(".csv")
        data_path.write_text(report.to_csv())
    else:
        data_path = Path(out_base).with_suffix(".json")
        data_path.write_text(report.to_json() + "\n")
    figures = []
    if not args.no_figures:
        from . import plots
        figures = [str(p) for p in
                   plots.render_table_figures(report, out_base)]
    print(json.dumps({
        "table": args.table, "scale": report.scale, "trials": report.trials,
        "smoke": report.smoke, "violations": list(report.violations),
        "wall_time": report.wall_time, "data": str(data_path),
        "figures": figures,
    }, indent=2))
    return 1 if report.violations else 0


def _cmd_audit(args) -> int:
    rows = bench.flop_audit(sizes=tuple(_int_list(args.sizes)),
                            base_seed=args.seed)
    ok = all(r.ok for r in rows)
    if args.format == "csv":
        lines = ["family,n,adds,muls,rv_count,ok"]
        lines += [f"{r.family},{r.n},{r.adds},{r.muls},{r.rv_count},{r.ok}"
                  for r in rows]
        text = "\n".join(lines) + "\n"
        if args.out:
            Path(args.out).write_text(text)
        print(text, end="")
    else:
        _emit({"rows": [r.to_dict() for r in rows], "ok": ok}, args.out)
    return 0 if ok else 1


def _cmd_mc_norms(args) -> int:
    summary = bench.monte_carlo_gaussian_norms(args.m, args.n, args.trials,
                                               RngStream(args.seed))
    _emit(summary.to_dict(), args.out)
    checks = [summary.norm_ok]
    if summary.pinv_ok is not None:
        checks.append(summary.pinv_ok)
    return 0 if all(checks) else 1


# ---------------------------------------------------------------------------
# parser

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sketchlab",
        description="Structured sketching toolkit: low-rank range finding, "
                    "sketched least squares, and experiment reproduction.")
    parser.add_argument("--config", help="TOML or JSON file with defaults "
                                         "for the chosen subcommand")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    def common(p):
        p.add_argument("--seed", type=int, default=bench.DEFAULT_SEED)
        p.add_argument("--out", help="write the JSON/CSV result here")

    p = subparsers["gen"] = sub.add_parser(
        "gen", help="generate a test input matrix")
    common(p)
    p.add_argument("--kind", choices=("svd", "laplacian", "fd", "factor"),
                   default="svd")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--m", type=int, help="row count for factor inputs")
    p.add_argument("--r", type=int, default=8)
    p.add_argument("--tail", type=float, default=1e-10)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--preset", choices=tuple(bench._FD_PRESETS),
                   default="small")
    p.set_defaults(func=_cmd_gen)

    p = subparsers["approx"] = sub.add_parser(
        "approx", help="one range-finder run on a matrix file")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--multiplier", default="gaussian",
                   choices=sorted(bench.MULTIPLIER_RECIPES))
    p.add_argument("--l", type=int, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--estimator", choices=("exact", "power", "frievalds"),
                   default="exact")
    p.set_defaults(func=_cmd_approx)

    p = subparsers["recursive"] = sub.add_parser("recursive", help="block-growing range finder")
    common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--multiplier", default="gaussian",
                   choices=sorted(bench.MULTIPLIER_RECIPES))
    p.add_argument("--blocks", help="comma-separated block widths")
    p.add_argument("--block-size", type=int, default=8,
                   help="uniform width when --blocks is not given")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--estimator", choices=("exact", "power", "frievalds"),
                   default="exact")
    p.set_defaults(func=_cmd_recursive)

    p = subparsers["lsr"] = sub.add_parser("lsr", help="sketched least-squares ratio study")
    common(p)
    p.add_argument("--m", type=int, default=2000)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--k", type=int, help="sketch rows; default from "
                                         "--delta/--xi rule")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--xi", type=float, default=0.5)
    p.add_argument("--kind", choices=("gaussian", "orthogonal"),
                   default="orthogonal")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--coverage", type=float, default=0.9,
                   help="required fraction of ratios inside the band")
    p.set_defaults(func=_cmd_lsr)

    p = subparsers["bench"] = sub.add_parser("bench", help="reproduce a published table")
    common(p)
    p.add_argument("--table", type=int, required=True,
                   choices=tuple(range(2, 10)))
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    p.add_argument("--trials", type=int,
                   help="override trial count (marks the run as smoke)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=_cmd_bench)

    p = subparsers["audit"] = sub.add_parser("audit", help="flop budgets for the whole catalog")
    common(p)
    p.add_argument("--sizes", default="128,512,1024")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=_cmd_audit)

    p = subparsers["mc-norms"] = sub.add_parser("mc-norms", help="Monte Carlo Gaussian norm bounds")
    common(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=500)
    p.set_defaults(func=_cmd_mc_norms)

    return parser, subparsers


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = _build_parser()
    # Two-pass parse: --config supplies defaults, explicit flags override.
    # The probe scan is manual: a real parse would reject a command line
    # whose required flags are meant to come from the config file.
    config_path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
            break
        if tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
            break
    if config_path:
        try:
            overrides = _load_config(config_path)
        except (OSError, ValueError) as exc:
            print(f"sketchlab: bad config: {exc}", file=sys.stderr)
            return 2
        known = {a.dest for a in parser._actions}
        for p in subparsers.values():
            known |= {a.dest for a in p._actions}
        unknown = set(overrides) - known
        if unknown:
            print(f"sketchlab: unknown config keys: {sorted(unknown)}",
                  file=sys.stderr)
            return 2
        for p in subparsers.values():
            dests = {a.dest for a in p._actions}
            p.set_defaults(**{k: v for k, v in overrides.items()
                              if k in dests})
            # a config-supplied value satisfies a required flag
            for action in p._actions:
                if action.required and action.dest in overrides:
                    action.required = False
    args = parser.parse_args(argv)
    if args.command == "gen" and not args.out:
        parser.error("gen requires --out")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"sketchlab: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
