"""``mmcorrect`` command line.

Every experiment subcommand builds an experiment config from ``--config``
(if given) and then applies flag overrides.  Exit codes: 0 pass, 1 config
error, 2 assertion failure, 3 incomplete outcome.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from ..ffmat import mat_mul
from .config import ConfigError, config_from_dict, load_config
from .matio import read_matrix, serialize_matrix, write_matrix
from .runner import EXIT_CONFIG, EXIT_PASS, run_experiment

# subcommand -> [(flag, params key)]
_PARAM_FLAGS = {
    "reduce-high": [("--alpha", "alpha"), ("--k", "k"), ("--failure-target", "failure_target")],
    "reduce-onesided": [
        ("--delta", "delta"),
        ("--t", "t"),
        ("--k", "k"),
        ("--budget", "R"),
        ("--delta0-hint", "delta0_hint"),
    ],
    "estimate-good": [("--samples", "samples"), ("--threshold", "threshold")],
    "lemma48": [("--k", "k"), ("--ell", "ell"), ("--samples", "samples")],
    "bogolyubov-check": [("--density", "density"), ("--t", "t")],
    "chang-check": [("--density", "density"), ("--gamma", "gamma")],
    "parseval": [("--density", "density")],
    "bench": [("--reduction", "reduction"), ("--alpha", "alpha"), ("--k", "k"), ("--delta", "delta"), ("--t", "t"), ("--budget", "R")],
}
_HELP = {
    "reduce-high": "worst-case product from a high-agreement two-sided oracle",
    "reduce-onesided": "worst-case product from a one-sided oracle over GF(2)",
    "estimate-good": "sample which output coordinates an oracle answers with 1 often",
    "lemma48": "low-rank subspace hitting experiment",
    "bogolyubov-check": "verify the sumset probability bound on random subsets",
    "chang-check": "compare large-spectrum dimension with its upper bound",
    "parseval": "check the integer Parseval identity on random subsets",
    "bench": "time direct multiplication against a reduction",
}


def _scalar(text: str):
    """JSON-ish scalar: int, bool, or the string itself (rationals stay strings)."""
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        return text


def _key_values(pairs, flag: str) -> dict:
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"{flag}: expected KEY=VALUE, got {item!r}")
        out[key] = _scalar(value)
    return out


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", default=default, help="master seed (decimal 64-bit integer)")
    parser.add_argument("--config", default=default, help="JSON experiment config")
    parser.add_argument("--out", default=default, help="write the report (or product) here")
    parser.add_argument("--threads", type=int, default=default, help="worker threads for trials")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)

    parser = argparse.ArgumentParser(prog="mmcorrect", description="Self-correcting matrix multiplication experiments.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    mul = sub.add_parser("mul", parents=[common], help="multiply two matrix files")
    mul.add_argument("a", help="left matrix file")
    mul.add_argument("b", help="right matrix file")

    for name, flags in _PARAM_FLAGS.items():
        cmd = sub.add_parser(name, parents=[common], help=_HELP[name])
        cmd.add_argument("--n", type=int)
        cmd.add_argument("--p", type=int)
        cmd.add_argument("--trials", type=int)
        cmd.add_argument("--inputs", choices=("uniform", "ones", "identity", "zeros"))
        cmd.add_argument("--oracle", dest="oracle_kind")
        cmd.add_argument("--oracle-seed")
        cmd.add_argument("--oracle-param", action="append", metavar="KEY=VALUE")
        cmd.add_argument("--param", action="append", metavar="KEY=VALUE")
        cmd.add_argument("--expect", action="append", metavar="KEY=VALUE")
        for flag, key in flags:
            cmd.add_argument(flag, dest=f"p_{key}", type=_scalar)
    return parser


def _experiment_config(args) -> dict:
    raw = load_config(args.config) if args.config else {}
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    raw = dict(raw)
    if raw.get("experiment", args.command) != args.command:
        raise ConfigError(f"experiment: config names {raw['experiment']!r} but the subcommand is {args.command!r}")
    raw["experiment"] = args.command
    for key in ("n", "p", "trials", "inputs"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["out"] = args.out
    if args.threads is not None:
        raw["threads"] = args.threads
    oracle = dict(raw.get("oracle") or {})
    if args.oracle_kind is not None:
        oracle["kind"] = args.oracle_kind
    if args.oracle_seed is not None:
        oracle["seed"] = args.oracle_seed
    oracle["params"] = {**(oracle.get("params") or {}), **_key_values(args.oracle_param, "--oracle-param")}
    raw["oracle"] = oracle
    params = {**(raw.get("params") or {}), **_key_values(args.param, "--param")}
    for name, value in vars(args).items():
        if name.startswith("p_") and value is not None:
            params[name[2:]] = value
    raw["params"] = params
    raw["expect"] = {**(raw.get("expect") or {}), **_key_values(args.expect, "--expect")}
    return raw


def _mul(args) -> int:
    C = mat_mul(read_matrix(args.a), read_matrix(args.b))
    if args.out:
        write_matrix(args.out, C)
    else:
        sys.stdout.write(serialize_matrix(C))
    return EXIT_PASS


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        if args.command == "mul":
            return _mul(args)
        config = config_from_dict(_experiment_config(args))
        report = run_experiment(config)
    except (ValueError, OSError) as exc:
        # ConfigError and ParseError are ValueErrors, as are shape/field mismatches
        print(f"mmcorrect: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if config.out:
        print(f"{config.experiment}: {report.status} (report written to {config.out})", file=sys.stderr)
    else:
        sys.stdout.write(report.dumps() + "\n")
    for line in report.failures:
        print(f"mmcorrect: {line}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
