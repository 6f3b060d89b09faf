"""Command-line interface.

Subcommands: constants, norm, testing, trace, verify-bounds, counterexample,
sweep.  Config values come from an optional JSON file plus flag overrides;
the master seed defaults to the SPARSEBUMP_SEED environment variable.
Exit code is 0 on success, 1 when a mathematical assertion failed, and 2 on
usage or config errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .bumps import EntropyFunction, ExponentConfig, direct_bumps, entropy_bumps
from .grid import parse_cube
from .lab import ExperimentConfig, run_counterexample, run_sweep, run_verify_bounds
from .operators import exact_norm_l2, norm_lower_bound, testing_constants
from .prooftrace import direct_trace, dual_direct_trace, dual_entropy_trace, entropy_trace
from .sparse import family_from_json
from .weights import weight_from_json


def _parse_eps(text: str) -> EntropyFunction:
    try:
        kind, _, delta = text.partition(":")
        return EntropyFunction(kind, float(delta) if delta else 1.0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_levels(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x)


def _load_weight(path: str):
    return weight_from_json(Path(path).read_text())


def _load_family(path: str):
    return family_from_json(Path(path).read_text())


def _add_weight_args(sub) -> None:
    sub.add_argument("--weights", help="weight JSON used for both sigma and w")
    sub.add_argument("--sigma", help="sigma weight JSON")
    sub.add_argument("--w", help="w weight JSON")


def _resolve_weights(args):
    if args.weights:
        both = _load_weight(args.weights)
        return both, both
    if not (args.sigma and args.w):
        raise ValueError("need --weights or both --sigma and --w")
    return _load_weight(args.sigma), _load_weight(args.w)


def _add_exponent_args(sub) -> None:
    sub.add_argument("--p", type=float, default=2.0)
    sub.add_argument("--q", type=float, default=3.0)
    sub.add_argument("--alpha", type=float, default=0.0)
    sub.add_argument("--mode", choices=("strict", "extended"), default="strict")
    sub.add_argument("--eps", type=_parse_eps, default=EntropyFunction("entropy", 1.0),
                     metavar="KIND:DELTA", help="e.g. entropy:1 or direct:0.5")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsebump",
        description="Two-weight bump constants and certified inequality chains "
                    "for sparse operators on dyadic grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_const = sub.add_parser("constants", help="bump constants for a weight pair")
    _add_weight_args(p_const)
    _add_exponent_args(p_const)

    p_norm = sub.add_parser("norm", help="operator norm (exact L2 oracle and lower bound)")
    p_norm.add_argument("--family", required=True)
    _add_weight_args(p_norm)
    _add_exponent_args(p_norm)
    p_norm.add_argument("--budget", type=int, default=200)
    p_norm.add_argument("--seed", type=int, default=None)

    p_test = sub.add_parser("testing", help="testing constants over a family")
    p_test.add_argument("--family", required=True)
    _add_weight_args(p_test)
    _add_exponent_args(p_test)

    p_trace = sub.add_parser("trace", help="run a certified inequality chain")
    p_trace.add_argument("--family", required=True)
    _add_weight_args(p_trace)
    _add_exponent_args(p_trace)
    p_trace.add_argument("--kind", choices=("entropy", "direct"), default="entropy")
    p_trace.add_argument("--cube", default=None, help="R in cube text form (default: family root)")
    p_trace.add_argument("--dual", action="store_true", help="run the swapped-argument chain")

    for name in ("verify-bounds", "sweep"):
        p_run = sub.add_parser(name, help=f"run the {name} suite")
        p_run.add_argument("--config", default=None, help="ExperimentConfig JSON file")
        p_run.add_argument("--out-dir", default=None)
        p_run.add_argument("--seed", type=int, default=None, help="master seed")
        p_run.add_argument("--instances", type=int, default=None)
        p_run.add_argument("--leaf-level", type=int, default=None)
        p_run.add_argument("--dimension", type=int, default=None)
        p_run.add_argument("--lambda", dest="lam", type=float, default=None)
        p_run.add_argument("--p", type=float, default=None)
        p_run.add_argument("--q", type=float, default=None)
        p_run.add_argument("--alpha", type=float, default=None)
        p_run.add_argument("--mode", choices=("strict", "extended"), default=None)
        p_run.add_argument("--delta", type=float, default=None)
        p_run.add_argument("--budget", type=int, default=None)
        p_run.add_argument("--target-size", type=int, default=None)
        p_run.add_argument("--volatility", type=float, default=None)
        p_run.add_argument("--family-kind", choices=("random", "stopping", "mixed"), default=None)
        p_run.add_argument("--levels", type=_parse_levels, default=None)
        p_run.add_argument("--lambdas", type=_parse_floats, default=None)

    p_ce = sub.add_parser("counterexample", help="level study of the divergent-entropy pair")
    p_ce.add_argument("--levels", type=_parse_levels, default=(8, 12, 16, 20))
    p_ce.add_argument("--delta", type=float, default=0.5)
    p_ce.add_argument("--p", type=float, default=2.0)
    p_ce.add_argument("--q", type=float, default=2.0)
    p_ce.add_argument("--alpha", type=float, default=0.0)
    p_ce.add_argument("--out-dir", default=None)

    return parser


_OVERRIDE_FIELDS = (
    "instances", "lam", "p", "q", "alpha", "mode", "delta", "budget",
    "volatility", "levels", "lambdas",
)


def _suite_config(args, kind: str) -> ExperimentConfig:
    data = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    data["kind"] = kind
    if args.seed is not None:
        data["master_seed"] = args.seed
    elif "master_seed" not in data and os.environ.get("SPARSEBUMP_SEED"):
        data["master_seed"] = int(os.environ["SPARSEBUMP_SEED"])
    if args.leaf_level is not None:
        data["leaf_level"] = args.leaf_level
    if args.dimension is not None:
        data["dimension"] = args.dimension
    if getattr(args, "target_size", None) is not None:
        data["target_size"] = args.target_size
    if getattr(args, "family_kind", None) is not None:
        data["family_kind"] = args.family_kind
    for name in _OVERRIDE_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    if args.out_dir is not None:
        data["out_dir"] = args.out_dir
    return ExperimentConfig.from_dict(data)


def _emit(report, out_dir: str | None, stem: str) -> None:
    if out_dir:
        csv_path, json_path = report.write(out_dir, stem)
        print(f"wrote {csv_path}")
        print(f"wrote {json_path}")
    else:
        sys.stdout.write(report.csv_text())
    print(json.dumps({"violations": report.violations,
                      "aggregates": report.aggregates}, sort_keys=True, default=str))


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        if args.command == "constants":
            sigma, w = _resolve_weights(args)
            cfg = ExponentConfig(args.p, args.q, args.alpha, sigma.grid.dimension, args.mode)
            if args.eps.kind == "entropy":
                report = entropy_bumps(sigma, w, cfg, args.eps)
                skipped = "D"
            else:
                report = direct_bumps(sigma, w, cfg, args.eps)
                skipped = "E"
            out = report.to_dict()
            out["skipped"] = f"{skipped} (needs {'direct' if skipped == 'D' else 'entropy'} eps)"
            print(json.dumps(out, sort_keys=True))
            return 0

        if args.command == "norm":
            sigma, w = _resolve_weights(args)
            family = _load_family(args.family)
            cfg = ExponentConfig(args.p, args.q, args.alpha, sigma.grid.dimension, args.mode)
            seed = args.seed if args.seed is not None else int(os.environ.get("SPARSEBUMP_SEED", "0"))
            out = {"lower_bound": norm_lower_bound(family, sigma, w, cfg, args.budget, seed=seed)}
            if args.p == 2.0 and args.q == 2.0:
                out["exact_l2"] = exact_norm_l2(family, sigma, w, args.alpha)
            print(json.dumps(out, sort_keys=True))
            return 0

        if args.command == "testing":
            sigma, w = _resolve_weights(args)
            family = _load_family(args.family)
            cfg = ExponentConfig(args.p, args.q, args.alpha, sigma.grid.dimension, args.mode)
            print(json.dumps(testing_constants(family, sigma, w, cfg).to_dict(), sort_keys=True))
            return 0

        if args.command == "trace":
            sigma, w = _resolve_weights(args)
            family = _load_family(args.family)
            cfg = ExponentConfig(args.p, args.q, args.alpha, sigma.grid.dimension, args.mode)
            r_cube = parse_cube(args.cube) if args.cube else family.root
            runners = {
                ("entropy", False): entropy_trace,
                ("entropy", True): dual_entropy_trace,
                ("direct", False): direct_trace,
                ("direct", True): dual_direct_trace,
            }
            eps = args.eps
            if eps.kind != args.kind:
                eps = EntropyFunction(args.kind, eps.delta)
            report = runners[(args.kind, args.dual)](family, sigma, w, cfg, eps, r_cube)
            print(report.to_json())
            return 0 if report.passed else 1

        if args.command == "verify-bounds":
            cfg = _suite_config(args, "verify-bounds")
            report = run_verify_bounds(cfg)
            _emit(report, cfg.out_dir, "verify_bounds")
            return 1 if report.violations else 0

        if args.command == "sweep":
            cfg = _suite_config(args, "sweep")
            report = run_sweep(cfg)
            _emit(report, cfg.out_dir, "sweep")
            return 1 if report.violations else 0

        if args.command == "counterexample":
            report = run_counterexample(args.levels, args.delta, args.p, args.q, args.alpha)
            _emit(report, args.out_dir, "counterexample")
            return 1 if report.violations else 0

        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
