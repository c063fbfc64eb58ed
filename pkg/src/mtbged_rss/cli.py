"""Command-line front end.

Exit codes: 0 success, 1 check failure, 2 usage or validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .efficiency import build_table, check_table, render_table
from .estimators import ESTIMATORS, estimate
from .model import ModelParams
from .montecarlo import CHECKS, ExperimentConfig, run
from .schemes import KINDS, UNBALANCED, RankedSample, SchemeSpec, draw, draw_direct

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _retained(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--retained expects a comma list of integers, got {text!r}") from None


def _add_scheme_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("scheme")
    g.add_argument("--scheme", required=True, choices=KINDS)
    g.add_argument("--n", type=int, help="set size (required)")
    g.add_argument("--k", type=int, help="lrss coefficient")
    g.add_argument("--gamma", type=float, help="lrss trimming fraction, k = floor(n * gamma)")
    g.add_argument("--l", type=int, help="msrss stage count")
    g.add_argument("--retained", type=_retained, help="crss retained ranks, e.g. 1,3,4")


def _add_param_flags(p: argparse.ArgumentParser, *, alpha2_required: bool) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--alpha1", type=float, default=1.0)
    g.add_argument("--alpha2", type=float, required=alpha2_required, default=None if alpha2_required else 1.0)
    g.add_argument("--theta1", type=float, default=1.0)
    g.add_argument("--theta2", type=float, default=None)
    g.add_argument("--lambda", dest="lam", type=float, default=None)


def _add_output_flags(p: argparse.ArgumentParser, formats, default) -> None:
    p.add_argument("--format", choices=formats, default=default)
    p.add_argument("--out", type=Path, help="write here instead of stdout")
    p.add_argument("--digits", type=int, default=6, help="significant digits of floating output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtbged-rss",
        description="Ranked set sampling estimators for the mean of a Morgenstern bivariate generalized exponential.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("tables", help="reproduce the efficiency tables")
    t.add_argument("--which", type=int, choices=(1, 2, 3), required=True)
    t.add_argument("--format", choices=("csv", "json", "md"), default="csv")
    t.add_argument("--out", type=Path)
    t.add_argument("--digits", type=int, default=None, help="decimal places (default: printed precision)")
    t.add_argument("--check", action="store_true", help="compare with the published values")
    t.add_argument("--include-negative", action="store_true", help="add negative-lambda rows to table 1")

    e = sub.add_parser("estimate", help="estimate mu_y from a sample file")
    _add_scheme_flags(e)
    _add_param_flags(e, alpha2_required=True)
    e.add_argument("--estimator", choices=sorted(ESTIMATORS))
    e.add_argument("data", type=Path, help="sample file (.csv or .json)")
    _add_output_flags(e, ("json",), "json")

    s = sub.add_parser("simulate", help="Monte Carlo check of an estimator")
    _add_scheme_flags(s)
    _add_param_flags(s, alpha2_required=False)
    s.add_argument("--estimator", choices=sorted(ESTIMATORS))
    s.add_argument("--reps", type=int, default=200_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--checks", default="unbiasedness,variance,variance-exact", help=f"comma list from {','.join(CHECKS)}")
    s.add_argument("--sampler", choices=("physical", "direct"), default="physical")
    s.add_argument("--workers", type=int, default=1)
    _add_output_flags(s, ("md", "json"), "md")

    a = sub.add_parser("sample", help="draw one ranked sample")
    _add_scheme_flags(a)
    _add_param_flags(a, alpha2_required=False)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--direct", action="store_true", help="invert concomitant laws instead of building sets")
    _add_output_flags(a, ("csv", "json"), "csv")
    return parser


def _scheme(args) -> SchemeSpec:
    kind = args.scheme
    lam = getattr(args, "lam", None)
    if kind in UNBALANCED and lam is not None and not lam > 0:
        raise UsageError(f"λ must be positive for unbalanced schemes ({kind}), got {lam}")
    if args.n is None:
        raise UsageError("--n is required")
    if args.retained is not None and kind != "crss":
        raise UsageError("--retained only applies to --scheme crss")
    if (args.k is not None or args.gamma is not None) and kind != "lrss":
        raise UsageError("--k/--gamma only apply to --scheme lrss")
    if args.l is not None and kind not in ("msrss", "urss"):
        raise UsageError("--l only applies to --scheme msrss")
    if kind == "crss":
        if args.retained is None:
            raise UsageError("--scheme crss needs --retained")
        return SchemeSpec.crss(args.n, args.retained)
    if kind == "lrss":
        if args.k is None and args.gamma is None:
            raise UsageError("--scheme lrss needs --k or --gamma")
        return SchemeSpec.lrss(args.n, k=args.k, gamma=args.gamma)
    if kind == "msrss":
        if args.l is None:
            raise UsageError("--scheme msrss needs --l")
        return SchemeSpec.msrss(args.n, args.l)
    return SchemeSpec(kind, args.n, l=args.l if kind == "urss" else None)


def _params(args) -> ModelParams:
    lam = 0.0 if args.lam is None else args.lam
    theta2 = 1.0 if args.theta2 is None else args.theta2
    return ModelParams(args.alpha1, args.alpha2, args.theta1, theta2, lam)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        out.write_text(text if text.endswith("\n") else text + "\n")


def _echo_config(command: str, config: dict) -> None:
    print(f"# {command} " + json.dumps(config, sort_keys=True, default=str), file=sys.stderr)


def cmd_tables(args) -> int:
    rows = build_table(args.which, include_negative=args.include_negative)
    _echo_config("tables", {"which": args.which, "format": args.format, "digits": args.digits,
                            "include_negative": args.include_negative, "check": args.check})
    _emit(render_table(args.which, rows, args.format, args.digits), args.out)
    if args.check:
        matched, total, mismatches = check_table(args.which, rows)
        for line in mismatches:
            print(f"mismatch {line}", file=sys.stderr)
        print(f"{matched}/{total} cells match", file=sys.stderr)
        return EXIT_OK if matched == total else EXIT_CHECK
    return EXIT_OK


def _read_sample(path: Path, spec: SchemeSpec) -> RankedSample:
    text = path.read_text()
    if path.suffix.lower() == ".json":
        try:
            sample = RankedSample.from_json(text)
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ValueError(f"malformed sample JSON: {exc}") from None
        if sample.scheme != spec:
            raise ValueError(f"file scheme {sample.scheme.to_dict()} does not match flags {spec.to_dict()}")
        return sample
    return RankedSample.from_csv(text, spec)


def cmd_estimate(args) -> int:
    spec = _scheme(args)
    _echo_config("estimate", {"scheme": spec.to_dict(), "alpha2": args.alpha2, "theta2": args.theta2,
                              "lambda": args.lam, "estimator": args.estimator, "data": str(args.data)})
    sample = _read_sample(args.data, spec)
    result = estimate(sample, args.alpha2, args.theta2, args.lam, args.estimator)
    _emit(result.to_json(args.digits), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec = _scheme(args)
    checks = tuple(c.strip() for c in args.checks.split(",") if c.strip())
    config = ExperimentConfig(
        scheme=spec,
        params=_params(args),
        replications=args.reps,
        seed=args.seed,
        checks=checks,
        estimator=args.estimator,
        sampler=args.sampler,
        workers=args.workers,
    )
    _echo_config("simulate", config.to_dict())
    report = run(config)
    _emit(report.to_json() if args.format == "json" else report.summary(args.digits), args.out)
    return EXIT_CHECK if report.failed else EXIT_OK


def cmd_sample(args) -> int:
    spec = _scheme(args)
    params = _params(args)
    _echo_config("sample", {"scheme": spec.to_dict(), "params": params.to_dict(), "seed": args.seed,
                            "direct": args.direct})
    rng = np.random.default_rng(args.seed)
    sample = (draw_direct if args.direct else draw)(spec, params, rng)
    if args.format == "json":
        text = sample.to_json()
    else:
        text = sample.to_csv(args.digits)
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {"tables": cmd_tables, "estimate": cmd_estimate, "simulate": cmd_simulate, "sample": cmd_sample}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
