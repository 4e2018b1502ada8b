"""Command line entry point: run, plot, gap, scenario and list."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, KrylovLabError
from .experiments import (
    GAP_COLUMNS,
    ExperimentConfig,
    bundled_configs,
    load_config,
    run_experiment,
)
from .operators import OPERATOR_TABLE
from .perturb import SCENARIOS, run_scenario
from .report import column_values, read_csv, rows_to_csv, svg_plot

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE = 0, 1, 2
OUT_ENV = "KRYLOVLAB_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (complex, np.complexfloating)):
        return f"{obj.real:.17g}{obj.imag:+.17g}i"
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _out_dir(arg):
    folder = Path(arg or os.environ.get(OUT_ENV) or ".")
    folder.mkdir(parents=True, exist_ok=True)
    return folder


class _Outputs:
    """Write files atomically; on failure remove whatever was written."""

    def __init__(self):
        self.written = []

    def write(self, path, text):
        path = Path(path)
        tmp = path.with_name(path.name + ".part")
        self.written.append(tmp)
        tmp.write_text(text, newline="")
        tmp.replace(path)
        self.written[-1] = path

    def rollback(self):
        for p in self.written:
            try:
                p.unlink()
            except FileNotFoundError:
                pass


def _flat_rows(rows):
    out = []
    for row in rows:
        flat = {}
        for k, v in row.items():
            if isinstance(v, dict):
                for kk, vv in v.items():
                    if not isinstance(vv, (dict, list)):
                        flat[f"{k}_{kk}"] = vv
            elif not isinstance(v, list):
                flat[k] = v
        out.append(flat)
    return out


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_run(args, outputs):
    cfg = load_config(args.config)
    start = time.perf_counter()
    result = run_experiment(cfg, jobs=args.jobs)
    folder = _out_dir(args.out)
    csv_path = folder / cfg.output.get("csv", f"{cfg.experiment}.csv")
    json_path = folder / cfg.output.get("json", f"{cfg.experiment}.json")
    src = Path(args.config)
    if src.is_file() and src.resolve() in (csv_path.resolve(), json_path.resolve()):
        raise ConfigError(f"output would overwrite the config {src}; pass --out")
    summary = dict(result.summary)
    summary["elapsed_s"] = round(time.perf_counter() - start, 3)
    outputs.write(csv_path, rows_to_csv(result.rows, result.columns))
    outputs.write(json_path, json.dumps(_jsonable(summary), indent=2) + "\n")
    for chk in summary["checks"]:
        print(f"{'PASS' if chk['holds'] else 'FAIL'} {chk['name']}: {chk['witness']}")
    print(f"wrote {csv_path} and {json_path}")
    if args.strict and not summary["ok"]:
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_plot(args, outputs):
    header, rows = read_csv(args.csv)
    if args.x not in header:
        raise ConfigError(f"x column {args.x!r} not in CSV; available: {', '.join(header)}")
    x = column_values(header, rows, args.x) if rows else np.zeros(0)
    series = {c: (column_values(header, rows, c) if rows else np.zeros(0)) for c in args.cols}
    if not rows:
        # still validate the requested columns
        for c in args.cols:
            if c not in header:
                column_values(header, [dict.fromkeys(header, 1.0)], c)
    svg = svg_plot(x, series, xlabel=args.x, ylabel=", ".join(args.cols), log=args.log,
                   title=args.title or Path(args.csv).stem)
    outputs.write(args.out, svg)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_gap(args, outputs):
    data = {"experiment": args.name, "kind": "gap", "operator": args.operator,
            "datum": args.datum, "orders": args.N, "ref_N": args.ref, "samples": args.samples,
            "iters": args.iters, "seed": args.seed}
    cfg = ExperimentConfig.from_dict(data)
    result = run_experiment(cfg, jobs=args.jobs)
    folder = _out_dir(args.out)
    outputs.write(folder / f"{args.name}.csv", rows_to_csv(result.rows, GAP_COLUMNS))
    outputs.write(folder / f"{args.name}.json",
                  json.dumps(_jsonable(result.summary), indent=2) + "\n")
    for row in result.rows:
        print(" ".join(f"{k}={row[k]:.6g}" for k in GAP_COLUMNS))
    return EXIT_OK


def cmd_scenario(args, outputs):
    rep = run_scenario(args.id, n_list=args.n, N_krylov=args.N, eps=args.eps,
                       grid="auto" if args.grid == "auto" else int(args.grid))
    folder = _out_dir(args.out)
    outputs.write(folder / f"scenario-{args.id}.json",
                  json.dumps(_jsonable(rep.to_json()), indent=2) + "\n")
    outputs.write(folder / f"scenario-{args.id}.csv", rows_to_csv(_flat_rows(rep.rows)))
    for a in rep.assertions:
        print(f"{'PASS' if a.holds else 'FAIL'} {a.name}: witness {a.witness:.6g}")
    if args.strict and not rep.ok:
        return EXIT_COMPUTE
    return EXIT_OK


def cmd_list(args, outputs):
    if args.what == "operators":
        for key, desc in OPERATOR_TABLE.items():
            print(f"{key:28s} {desc}")
    elif args.what == "experiments":
        for name in bundled_configs():
            cfg = load_config(name)
            print(f"{name:32s} kind={cfg.kind}")
    else:
        for name in SCENARIOS:
            print(name)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="krylovlab", description="Krylov solvability experiments")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("run", help="run an experiment config (path or bundled name)")
    r.add_argument("config")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or .)")
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--strict", action="store_true", help="exit 2 when a check fails")
    r.set_defaults(func=cmd_run)

    pl = sub.add_parser("plot", help="SVG line plot of CSV columns")
    pl.add_argument("csv")
    pl.add_argument("--cols", nargs="+", required=True,
                    help="column names or expressions such as rho1*N^2")
    pl.add_argument("--out", required=True)
    pl.add_argument("--x", default="N")
    pl.add_argument("--log", action="store_true")
    pl.add_argument("--title", default="")
    pl.set_defaults(func=cmd_plot)

    g = sub.add_parser("gap", help="gap and weak gap of K_N against a reference K_ref")
    g.add_argument("--operator", default="right-shift-N")
    g.add_argument("--datum", default="unit:1")
    g.add_argument("--N", type=int, nargs="+", default=[4, 8, 16, 32])
    g.add_argument("--ref", type=int, default=64)
    g.add_argument("--samples", type=int, default=512)
    g.add_argument("--iters", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--name", default="gap")
    g.add_argument("--out")
    g.add_argument("--jobs", type=int, default=1)
    g.set_defaults(func=cmd_gap)

    s = sub.add_parser("scenario", help="run a perturbation scenario")
    s.add_argument("id", choices=SCENARIOS)
    s.add_argument("--n", type=int, nargs="+")
    s.add_argument("--N", type=int, default=40)
    s.add_argument("--eps", type=float, default=0.05)
    s.add_argument("--grid", default="auto")
    s.add_argument("--out")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_scenario)

    ls = sub.add_parser("list", help="list registered identifiers")
    ls.add_argument("what", choices=["operators", "experiments", "scenarios"])
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None):
    outputs = _Outputs()
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be positive")
        return args.func(args, outputs)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        outputs.rollback()
        print(f"krylovlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (KrylovLabError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        outputs.rollback()
        print(f"krylovlab: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
