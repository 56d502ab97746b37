"""Command-line front end: ``dlqg {synth,compare,simulate,example}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DimensionError, NumericalError, ValidationError
from .evaluation import SynthesisFailure, compare
from .filtering import filter_pass
from .model import TABLE_ORDER, InformationPattern, load_problem, benchmark_problem, require_valid, save_problem
from .riccati import riccati_backward
from .runtime import build_policy, policy_from_gains, simulate
from .synthesis import gains_document, load_gains, save_gains

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


def g17(x):
    return format(float(x), ".17g")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def cmd_synth(args):
    spec = load_problem(args.problem)
    require_valid(spec)
    pattern = InformationPattern.parse(args.pattern)
    ric, filt = riccati_backward(spec), filter_pass(spec)
    policy = build_policy(spec, pattern, ric, filt)
    G = policy.gains.G if policy.gains is not None else None
    save_gains(gains_document(pattern, spec, ric, filt, policy.F, policy.F1, G), args.out)
    print(f"Jw {g17(ric.Jw)}")
    if policy.gains is not None:
        print(f"Jtilde {g17(policy.gains.Jtilde)}")
        print(f"J {g17(ric.Jw + policy.gains.Jtilde)}")
    return EXIT_OK


def cmd_compare(args):
    spec = load_problem(args.problem)
    patterns = [InformationPattern.parse(p) for p in args.pattern] if args.pattern else list(TABLE_ORDER)
    if args.runs < 1:
        raise ValidationError("--runs must be at least 1")
    report = compare(spec, patterns, runs=args.runs, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    print(report.format_table())
    return EXIT_OK


def cmd_simulate(args):
    spec = load_problem(args.problem)
    policy = policy_from_gains(spec, load_gains(args.gains))
    traj = simulate(spec, policy, args.seed, args.run)
    traj.to_csv(args.out)
    print(f"cost {g17(traj.cost)}")
    return EXIT_OK


def cmd_example(args):
    save_problem(benchmark_problem(N=args.horizon), args.out)
    return EXIT_OK


def build_parser():
    ap = _Parser(prog="dlqg", description="Delayed-sharing LQG synthesis and evaluation.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("synth", help="synthesize a gain schedule")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--pattern", default="three-player")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("compare", help="analytic and Monte Carlo cost of each pattern")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--pattern", action="append", help="repeat to pick patterns (default: all four)")
    sp.add_argument("--runs", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True, help="output directory")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("simulate", help="one closed-loop trajectory")
    sp.add_argument("--problem", required=True)
    sp.add_argument("--gains", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--run", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("example", help="write the three-player benchmark problem")
    sp.add_argument("--horizon", type=int, default=1000)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_example)
    return ap


def _fail(code, exc):
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except (NumericalError, SynthesisFailure) as exc:
        return _fail(EXIT_NUMERIC, exc)
    except (ValidationError, DimensionError, ValueError, OSError) as exc:
        return _fail(EXIT_INPUT, exc)


if __name__ == "__main__":
    sys.exit(main())
