"""Experiment configuration: JSON in, validated dataclasses out."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from ..oracles import (
    CoordinateRestricted,
    Exact,
    InputStructured,
    OneSidedMask,
    TwoSidedFlip,
)
from .._mix import as_generator

EXPERIMENTS = (
    "reduce-high",
    "reduce-onesided",
    "estimate-good",
    "lemma48",
    "bogolyubov-check",
    "chang-check",
    "parseval",
    "bench",
)
INPUT_KINDS = ("uniform", "ones", "identity", "zeros")
ORACLE_KINDS = ("exact", "two_sided_flip", "one_sided_mask", "coordinate_restricted", "input_structured")
RATIONAL_KEYS = {
    "alpha",
    "alpha_flip",
    "delta",
    "delta0_hint",
    "density",
    "failure_target",
    "gamma",
    "good_fraction",
    "min_frequency",
    "min_success_rate",
    "rho",
    "threshold",
}
_RATIONAL = re.compile(r"^\s*([+-]?\d+)\s*(?:/\s*(\d+)\s*)?$")
_DECIMAL = re.compile(r"^\s*[+-]?(\d+\.\d*|\.\d+)\s*$")


class ConfigError(ValueError):
    pass


def parse_rational(text, where: str = "value") -> Fraction:
    """Parse ``num/den`` (or an integer or decimal) exactly.

    Errors name the config path and the 1-based column of the offending
    character.
    """
    if isinstance(text, bool):
        raise ConfigError(f"{where}: expected a rational, got {text!r}")
    if isinstance(text, int):
        return Fraction(text)
    if not isinstance(text, str):
        raise ConfigError(f"{where}: expected a rational string 'num/den', got {text!r}")
    m = _RATIONAL.match(text)
    if m:
        num, den = m.group(1), m.group(2)
        if den is not None and int(den) == 0:
            col = text.index("/") + 2
            while col <= len(text) and text[col - 1] == " ":
                col += 1
            raise ConfigError(f"{where}: invalid rational {text!r}: zero denominator at column {col}")
        return Fraction(int(num), int(den) if den else 1)
    if _DECIMAL.match(text):
        return Fraction(text.strip())
    col = _first_bad_column(text)
    raise ConfigError(f"{where}: invalid rational {text!r}: unexpected character at column {col}")


def _first_bad_column(text: str) -> int:
    """1-based column where ``text`` stops matching ``[sign] digits [/ digits]``."""
    i, n = 0, len(text)

    def spaces():
        nonlocal i
        while i < n and text[i] == " ":
            i += 1

    def digits() -> bool:
        nonlocal i
        start = i
        while i < n and text[i].isdigit():
            i += 1
        return i > start

    spaces()
    if i < n and text[i] in "+-":
        i += 1
    if not digits():
        return i + 1
    spaces()
    if i < n and text[i] == "/":
        i += 1
        spaces()
        if not digits():
            return i + 1
        spaces()
    return i + 1


def parse_seed(value, where: str = "seed") -> int:
    try:
        seed = int(value, 10) if isinstance(value, str) else value
    except ValueError:
        raise ConfigError(f"{where}: expected a decimal 64-bit integer, got {value!r}") from None
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"{where}: expected a decimal 64-bit integer, got {value!r}")
    return seed


def _parse_params(raw: Any, where: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object")
    out = {}
    for key, value in raw.items():
        path = f"{where}.{key}"
        if key in RATIONAL_KEYS:
            out[key] = parse_rational(value, path)
        elif key == "seed":
            out[key] = parse_seed(value, path)
        else:
            out[key] = value
    return out


@dataclass(frozen=True)
class OracleSpec:
    kind: str = "exact"
    params: dict = field(default_factory=dict)
    seed: int = 0

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": _jsonable(self.params), "seed": str(self.seed)}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n: int = 16
    p: int = 2
    oracle: OracleSpec = OracleSpec()
    params: dict = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    inputs: str = "uniform"
    expect: dict = field(default_factory=dict)
    out: Optional[str] = None
    threads: int = 1

    def to_json(self) -> dict:
        """Config echo for reports (``out`` and ``threads`` do not affect results)."""
        return {
            "experiment": self.experiment,
            "n": self.n,
            "p": self.p,
            "oracle": self.oracle.to_json(),
            "params": _jsonable(self.params),
            "trials": self.trials,
            "seed": str(self.seed),
            "inputs": self.inputs,
            "expect": _jsonable(self.expect),
        }


def _jsonable(value):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _int_field(raw: dict, key: str, default: int, lo: int = 1) -> int:
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    if value < lo:
        raise ConfigError(f"{key}: must be >= {lo}, got {value}")
    return value


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: expected a JSON object")
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: expected one of {', '.join(EXPERIMENTS)}, got {experiment!r}")
    oracle_raw = raw.get("oracle") or {}
    if not isinstance(oracle_raw, dict):
        raise ConfigError("oracle: expected an object")
    kind = oracle_raw.get("kind", "exact")
    if kind not in ORACLE_KINDS:
        raise ConfigError(f"oracle.kind: expected one of {', '.join(ORACLE_KINDS)}, got {kind!r}")
    oracle = OracleSpec(
        kind,
        _parse_params(oracle_raw.get("params"), "oracle.params"),
        parse_seed(oracle_raw.get("seed", 0), "oracle.seed"),
    )
    inputs = raw.get("inputs", "uniform")
    if inputs not in INPUT_KINDS:
        raise ConfigError(f"inputs: expected one of {', '.join(INPUT_KINDS)}, got {inputs!r}")
    out = raw.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError("out: expected a path string")
    return ExperimentConfig(
        experiment=experiment,
        n=_int_field(raw, "n", 16),
        p=_int_field(raw, "p", 2, lo=2),
        oracle=oracle,
        params=_parse_params(raw.get("params"), "params"),
        trials=_int_field(raw, "trials", 1),
        seed=parse_seed(raw.get("seed", 0), "seed"),
        inputs=inputs,
        expect=_parse_params(raw.get("expect"), "expect"),
        out=out,
        threads=_int_field(raw, "threads", 1),
    )


def load_config(path) -> dict:
    """Raw JSON object from ``path``; JSON syntax errors carry line and column."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def build_oracle(spec: OracleSpec, n: int, p: int = 2):
    """Instantiate the oracle model described by ``spec``."""
    params = spec.params
    try:
        if spec.kind == "exact":
            return Exact(p, spec.seed)
        if spec.kind == "two_sided_flip":
            return TwoSidedFlip(params.get("alpha_flip", Fraction(0)), p, spec.seed)
        if p != 2:
            raise ConfigError(f"oracle.kind: {spec.kind} is defined over GF(2) only")
        rho = params.get("rho", Fraction(1))
        if spec.kind == "one_sided_mask":
            return OneSidedMask(rho, spec.seed)
        if spec.kind == "coordinate_restricted":
            if "good_set" in params:
                cells = frozenset((int(i), int(j)) for i, j in params["good_set"])
            else:
                frac = params.get("good_fraction", Fraction(1, 2))
                gen = as_generator(spec.seed)
                pick = gen.random((n, n)) < float(frac)
                cells = frozenset((int(i), int(j)) for i, j in zip(*pick.nonzero()))
            return CoordinateRestricted(cells, rho, spec.seed)
        if spec.kind == "input_structured":
            count = int(params.get("constraints", 1))
            return InputStructured.random(n, count, rho, spec.seed)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"oracle: {exc}") from None
    raise ConfigError(f"oracle.kind: unknown kind {spec.kind!r}")
