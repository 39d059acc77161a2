"""Command-line entry point.

    sleeping-experts run CONFIG [--check-invariants] [--seed S] [--out DIR]
    sleeping-experts generate CONFIG [--seed S] [--out DIR]
    sleeping-experts verify TRACE
    sleeping-experts oracle TRACE

``run`` exits with status 1 when an enabled invariant check fails; any
configuration or parse error exits with status 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import ConfigError, validate_environment
from .experiment import build_environment, generator_spec, load_config, run_experiment
from .envgen import generate
from .oracle import solve
from .traces import TraceParseError, read_trace, write_trace


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sleeping-experts", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a TOML config")
    run.add_argument("config")
    run.add_argument("--check-invariants", action="store_true", help="assert per-round guarantees")
    run.add_argument("--seed", type=_seed)
    run.add_argument("--out", help="output directory (overrides out_dir)")

    gen = sub.add_parser("generate", help="write the configured environment as a trace")
    gen.add_argument("config")
    gen.add_argument("--seed", type=_seed)
    gen.add_argument("--out", help="output directory (overrides out_dir)")

    ver = sub.add_parser("verify", help="validate a trace file")
    ver.add_argument("trace")

    orc = sub.add_parser("oracle", help="print the best ranking of a trace and its loss")
    orc.add_argument("trace")
    return parser


def cmd_run(args) -> int:
    config = load_config(args.config).with_overrides(args.seed, args.out, args.check_invariants)
    result = run_experiment(config)
    failures = result.violations
    for trial, alg, v in failures[:20]:
        print(f"trial {trial} {alg}: {v}", file=sys.stderr)
    if len(failures) > 20:
        print(f"... {len(failures) - 20} more violations", file=sys.stderr)
    print(f"wrote {config.out_path} ({len(result.trials)} trial runs, {len(failures)} violations)")
    return 1 if failures else 0


def cmd_generate(args) -> int:
    config = load_config(args.config).with_overrides(args.seed, args.out)
    if "trace_path" in config.env:
        raise ConfigError("generate needs an env generator spec, not a trace_path")
    env = generate(generator_spec(config))
    out = config.out_path
    out.mkdir(parents=True, exist_ok=True)
    write_trace(env, out / "trace.jsonl")
    print(out / "trace.jsonl")
    return 0


def cmd_verify(args) -> int:
    env = read_trace(args.trace)
    problems = validate_environment(env)
    for p in problems:
        print(p)
    if not problems:
        print(f"ok: N={env.N} K={env.K} T={env.T} {env.zero_count_class}")
    return 1 if problems else 0


def cmd_oracle(args) -> int:
    env = read_trace(args.trace)
    best, lstar, exact = solve(env)
    kind = "exact" if exact else "sampled upper bound"
    print(f"lstar {lstar:g} ({kind})")
    print("ranking " + " ".join(str(a) for a in best.order))
    return 0


COMMANDS = {"run": cmd_run, "generate": cmd_generate, "verify": cmd_verify, "oracle": cmd_oracle}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, TraceParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
