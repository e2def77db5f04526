"""Command line entry point: ``dynrealloc {adversary,run,oracle,fuzz-va}``.

Exit status is 0 when every checked invariant held and 2 on a violation, with
the replay file path printed to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .adversary import AdaptiveAdversary
from .geometry import as_rational
from .harness.io import encode, read_state, write_ops
from .harness.workloads import GENERATORS, build_generator, parse_param

VIOLATION = 2


def _params(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise SystemExit(f"parameter {pair!r} is not key=value")
        out[key.replace("-", "_")] = parse_param(value)
    return out


def _scope(text: str) -> int:
    """``"2^10"`` or ``"1024"`` -> 10."""
    if text.startswith("2^"):
        return int(text[2:])
    value = int(text)
    if value < 1 or value & (value - 1):
        raise argparse.ArgumentTypeError("scope must be a power of two")
    return value.bit_length() - 1


def cmd_adversary(args) -> int:
    source, preset = build_generator(args.name, _params(args.param), args.seed, args.ops)
    if isinstance(source, AdaptiveAdversary):
        print(
            f"{args.name} adapts to the allocator; drive it with "
            f"'dynrealloc run --adversary {args.name} --allocator ...'",
            file=sys.stderr,
        )
        return 1
    write_ops(args.out, source, preset)
    print(json.dumps({"ops": len(source), "preset": 0 if preset is None else len(preset[0]), "out": args.out}))
    return 0


def cmd_run(args) -> int:
    from .harness.runner import WorkloadConfig, run_workload

    if (args.ops is None) == (args.adversary is None):
        print("give exactly one of --ops or --adversary", file=sys.stderr)
        return 1
    cfg = WorkloadConfig(
        allocator=args.allocator,
        generator=args.adversary,
        params=_params(args.param),
        ops_path=args.ops,
        seed=args.seed,
        ops=args.max_ops,
        oracle_cadence=args.oracle_cadence,
        c=None if args.c is None else as_rational(args.c),
        p=args.p,
        replay_dir=args.replay_dir,
    )
    report = run_workload(cfg)
    if args.report:
        report.write(args.report, args.summary)
    summary = report.summary()
    print(json.dumps(summary, sort_keys=True))
    if not report.ok:
        print(report.replay_path or "violation (no replay directory given)", file=sys.stderr)
        return VIOLATION
    return 0


def cmd_oracle(args) -> int:
    from .oracle import oracle_feasible, oracle_max_slack, oracle_min_realloc

    instance, alloc = read_state(args.input)
    gamma = as_rational(args.gamma)
    if args.query == "feasible":
        result = {"feasible": oracle_feasible(instance, gamma), "gamma": gamma, "n": len(instance)}
    elif args.query == "slack":
        rep = oracle_max_slack(instance)
        result = {"feasible": rep.feasible, "slack_lower": rep.slack_lower, "slack_upper": rep.slack_upper}
    else:
        res = oracle_min_realloc(instance, alloc)
        result = {"count": res.count, "moved": list(res.moved), "witness": list(res.witness.slots)}
    text = json.dumps(encode(result), sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_fuzz_va(args) -> int:
    from .harness.fuzz import fuzz_va

    report = fuzz_va(args.seed, args.ops, args.scope, out_dir=args.out_dir)
    summary = report.summary()
    text = json.dumps(summary, sort_keys=True)
    if args.summary:
        Path(args.summary).write_text(text + "\n")
    print(text)
    if not report.ok:
        replay = next((v["replay"] for v in report.violations if v.get("replay")), None)
        print(replay or "violation (no --out-dir given)", file=sys.stderr)
        return VIOLATION
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynrealloc", description="Dynamic interval reallocation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("adversary", help="write a generated op stream as JSON Lines")
    p.add_argument("name", choices=sorted(GENERATORS))
    p.add_argument("param", nargs="*", help="generator parameters as key=value (rationals as p/q)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ops", type=int, default=1000, help="length of random streams")
    p.set_defaults(func=cmd_adversary)

    p = sub.add_parser("run", help="drive an allocator and report per-op metrics")
    p.add_argument("--allocator", default="fa", choices=("fa", "va", "mp", "naive-leftmost", "oracle"))
    p.add_argument("--ops", help="JSON Lines op stream")
    p.add_argument("--adversary", choices=sorted(GENERATORS), help="generate the stream (adaptive ones react live)")
    p.add_argument("--param", action="append", help="generator parameter key=value; repeatable")
    p.add_argument("--report", help="CSV report path (summary goes to <report>.summary.json)")
    p.add_argument("--summary", help="summary JSON path")
    p.add_argument("--oracle-cadence", type=int, default=0, help="cross-check every N-th insert with the oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-ops", type=int, default=1000)
    p.add_argument("--c", help="common window span for fa/mp (inferred when omitted)")
    p.add_argument("--p", type=int, default=3, help="processor count for mp")
    p.add_argument("--replay-dir", default=".", help="where replay files go on a violation")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="exact answers for small states")
    p.add_argument("query", choices=("feasible", "slack", "min-realloc"))
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--gamma", default="1")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("fuzz-va", help="random aligned workload against the aligned allocator")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--ops", type=int, default=100000)
    p.add_argument("--scope", type=_scope, default=10, help="coordinate range as 2^K or a power of two")
    p.add_argument("--out-dir", default=".", help="where counterexample and replay files go")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_fuzz_va)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
