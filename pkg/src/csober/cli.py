"""Command-line harness: run, sweep, verify-prop1, list.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
1 oracle failure (partial records are still written).
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from dataclasses import replace

import yaml

from .bench.baselines import METHODS
from .bench.problems import PROBLEMS, get_problem
from .bench.runner import (Cell, record_to_json, run_cell, run_sweep, summary, sweep_cells, sweep_csv,
                           sweep_json, write_csv)
from .errors import ConfigError, NumericalFailure, OracleError
from .optimizer import LoopConfig, Tolerance
from .quadrature import Prop1Instance, verify_prop1

EXIT_OK, EXIT_ORACLE, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML or JSON file whose keys mirror the long flags")
    p.add_argument("--problem", default="hartmann6")
    p.add_argument("--batch", type=int, default=5)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--no-fill", action="store_true", help="keep the LP batch size (no cTS fill)")
    p.add_argument("--candidates", type=int, default=4096)
    p.add_argument("--nystrom", type=int, default=512)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="csober", description="Constrained batch BO by kernel recombination.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="one method x problem x seed")
    _common(run)
    run.add_argument("--method", default="csober")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--tolerance", default="adaptive", help="adaptive or fixed:<value>")

    sweep = sub.add_parser("sweep", help="grid over seeds, tolerances and methods")
    _common(sweep)
    sweep.add_argument("--method", default="csober", help="comma-separated methods")
    sweep.add_argument("--seed", default="0", help="comma-separated seeds")
    sweep.add_argument("--tolerance", default="adaptive", help="comma-separated tolerances")

    ver = sub.add_parser("verify-prop1", help="Monte-Carlo check of the LP reward and integration bounds")
    ver.add_argument("--config")
    ver.add_argument("--instances", type=int, default=1)
    ver.add_argument("--trials", type=int, default=1000)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--N", type=int, default=200)
    ver.add_argument("--n", type=int, default=10)
    ver.add_argument("--M", type=int, default=50)
    ver.add_argument("--dim", type=int, default=2)
    ver.add_argument("--lengthscale", type=float, default=0.3)
    ver.add_argument("--eps-lp", type=float, default=None)
    ver.add_argument("--q-mode", choices=("random", "ones"), default="random")
    ver.add_argument("--solver", choices=("simplex", "highs"), default="simplex")
    ver.add_argument("--out")

    sub.add_parser("list", help="available problems and methods")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a mapping of flag names to values")
    known = vars(args)
    defaults = {}
    for key, value in cfg.items():
        dest = str(key).lstrip("-").replace("-", "_")
        if dest not in known or dest in ("command", "config"):
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        defaults[dest] = value
    # explicit command-line flags win over the file
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _loop_config(args, seed: int, tolerance: Tolerance) -> LoopConfig:
    return LoopConfig(batch_size=args.batch, iterations=args.iters, seed=seed, tolerance=tolerance,
                      fill_with_cts=not args.no_fill, n_candidates=args.candidates, n_nystrom=args.nystrom)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    if args.method not in METHODS:
        raise ConfigError(f"unknown method {args.method!r}; choose from {sorted(METHODS)}")
    get_problem(args.problem)
    cfg = _loop_config(args, args.seed, Tolerance.parse(args.tolerance))
    cell = Cell(args.problem, args.method, cfg)
    code = EXIT_OK
    try:
        result = run_cell(cell)
    except OracleError as exc:
        result = getattr(exc, "records", [])
        print(f"oracle failure: {exc}", file=sys.stderr)
        code = EXIT_ORACLE
    if args.format == "csv":
        buf = io.StringIO()
        write_csv(result, buf)
        _emit(buf.getvalue(), args.out)
        if code == EXIT_OK:
            print(json.dumps(summary(result, args.problem, cfg)), file=sys.stderr)
    else:
        doc = {"records": [record_to_json(r) for r in result]}
        if code == EXIT_OK:
            doc["summary"] = summary(result, args.problem, cfg)
        _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return code


def _split(text) -> list[str]:
    return [t for t in str(text).split(",") if t.strip()]


def _cmd_sweep(args) -> int:
    try:
        seeds = [int(s) for s in _split(args.seed)]
    except ValueError:
        raise ConfigError(f"seeds must be integers, got {args.seed!r}") from None
    tolerances = [Tolerance.parse(t) for t in _split(args.tolerance)]
    base = _loop_config(args, seeds[0] if seeds else 0, Tolerance())
    cells = sweep_cells(args.problem, _split(args.method), tolerances, seeds, base)
    results = run_sweep(cells)
    _emit(sweep_csv(results) if args.format == "csv" else sweep_json(results) + "\n", args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    spec = Prop1Instance(N=args.N, n=args.n, M=args.M, dim=args.dim, lengthscale=args.lengthscale,
                         eps_lp=args.eps_lp, q_mode=args.q_mode, solver=args.solver)
    if spec.M > spec.N or spec.n < 3:
        raise ConfigError("need M <= N and n >= 3")
    reports = [verify_prop1(spec, args.trials, seed=args.seed + i).to_dict() for i in range(args.instances)]
    doc = {
        "instances": reports,
        "lp1_violations": sum(r["lp1_violations"] for r in reports),
        "lp2_violations": sum(r["lp2_violations"] for r in reports),
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def _cmd_list(args) -> int:
    print("problems: " + ", ".join(sorted(PROBLEMS)))
    print("methods: " + ", ".join(sorted(METHODS)))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        handler = {"run": _cmd_run, "sweep": _cmd_sweep, "verify-prop1": _cmd_verify, "list": _cmd_list}
        return handler[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
