"""Seeded experiment execution and JSON reports.

Trial ``i`` draws everything from ``derive_seed(master, i)``; trials may run
on a thread pool but are collected by index, so every non-timing field of a
report depends only on the config.  Wall-clock numbers live in ``timing``.
"""
from __future__ import annotations

import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .. import __version__
from .._mix import derive_seed
from ..boolean_fourier import (
    SubsetF2n,
    bogolyubov_verify,
    chang_bound,
    chang_dimension,
    parseval_check,
)
from ..ffmat import Matrix, agreement, identity, mat_mul, ones, sample_uniform, zeros
from ..oracles import CallCounter, InputStructured, estimate_good_coordinates
from ..selfcorrect_high import HighParams, self_correct_high
from ..selfcorrect_onesided import (
    Incomplete,
    InvariantViolation,
    derive_params,
    lemma48_hit_rate,
    reduce_one_sided,
)
from .config import ConfigError, ExperimentConfig, build_oracle

EXIT_PASS = 0
EXIT_CONFIG = 1
EXIT_ASSERTION = 2
EXIT_INCOMPLETE = 3
BENCH_SIZES = (64, 128, 256, 512)


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def wilson_half_width(successes: int, trials: int, z: float = 1.96) -> float:
    """Half-width of the 95% Wilson score interval."""
    if trials == 0:
        return 0.0
    p = successes / trials
    denom = 1 + z * z / trials
    return z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom


@dataclass
class ExperimentReport:
    config: dict
    trials: list
    summary: dict
    oracle_calls: dict
    status: str
    timing: dict = field(default_factory=dict)
    seed: int = 0
    failures: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return {"pass": EXIT_PASS, "assertion_failure": EXIT_ASSERTION, "incomplete": EXIT_INCOMPLETE}[self.status]

    def to_json(self, with_timing: bool = True) -> dict:
        out = {
            "config": self.config,
            "seed": str(self.seed),
            "status": self.status,
            "exit_code": self.exit_code,
            "summary": self.summary,
            "oracle_calls": self.oracle_calls,
            "trials": self.trials,
            "failures": self.failures,
            "versions": versions(),
        }
        if with_timing:
            out["timing"] = self.timing
        return out

    def dumps(self, with_timing: bool = True) -> str:
        return json.dumps(self.to_json(with_timing), indent=2, sort_keys=True)


def versions() -> dict:
    return {"mmcorrect": __version__, "numpy": np.__version__, "python": platform.python_version()}


# --- shared pieces ------------------------------------------------------------


def make_inputs(kind: str, n: int, p: int, rng: np.random.Generator) -> tuple[Matrix, Matrix]:
    if kind == "uniform":
        return sample_uniform(n, n, p, rng), sample_uniform(n, n, p, rng)
    if kind == "ones":
        return ones(n, n, p), ones(n, n, p)
    if kind == "identity":
        return identity(n, p), identity(n, p)
    if kind == "zeros":
        return zeros(n, n, p), zeros(n, n, p)
    raise ConfigError(f"inputs: unknown kind {kind!r}")


def _time_direct(n: int, p: int, repeats: int = 3) -> float:
    rng = np.random.default_rng(0)
    A, B = sample_uniform(n, n, p, rng), sample_uniform(n, n, p, rng)
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        mat_mul(A, B)
        best = min(best, time.perf_counter() - start)
    return best


def _param(config: ExperimentConfig, key: str, default=None, kind=None):
    value = config.params.get(key, default)
    if kind is int and value is not None:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"params.{key}: expected an integer, got {value!r}")
    return value


def _high_params(config: ExperimentConfig, n: int) -> HighParams:
    try:
        return HighParams.for_size(
            n,
            _param(config, "alpha", Fraction(1, 20)),
            _param(config, "failure_target"),
            _param(config, "k", kind=int),
        )
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None


def _onesided_params(config: ExperimentConfig, n: int):
    overrides = {}
    for key, name in (("t", "t"), ("k", "k"), ("R", "R"), ("budget", "R")):
        if key in config.params:
            overrides[name] = _param(config, key, kind=int)
    for key in ("delta0_hint", "early_exit"):
        if key in config.params:
            overrides[key] = config.params[key]
    try:
        return derive_params(_param(config, "delta", Fraction(1, 2)), n, overrides)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from None


def _oracle(config: ExperimentConfig):
    return build_oracle(config.oracle, config.n, config.p)


def _run_trials(config: ExperimentConfig, one: Callable[[int, np.random.Generator], dict]) -> tuple[list, list]:
    """Outcomes and wall-clock seconds, both in trial order."""

    def wrapped(index: int):
        seed = derive_seed(config.seed, index)
        start = time.perf_counter()
        out = one(index, np.random.default_rng(seed))
        out = {"index": index, "seed": str(seed), **out}
        return out, time.perf_counter() - start

    if config.threads > 1 and config.trials > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            pairs = list(pool.map(wrapped, range(config.trials)))
    else:
        pairs = [wrapped(i) for i in range(config.trials)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _success_summary(successes: int, trials: int) -> dict:
    return {
        "successes": successes,
        "trials": trials,
        "success_rate": _frac(Fraction(successes, trials)),
        "half_width": round(wilson_half_width(successes, trials), 12),
    }


def _expectation_failures(config: ExperimentConfig, successes: int, trials: int) -> list:
    want = config.expect.get("min_success_rate")
    if want is not None and Fraction(successes, trials) < want:
        return [f"success rate {successes}/{trials} below expected {_frac(want)}"]
    return []


# --- experiments ----------------------------------------------------------------


def _reduce_high(config: ExperimentConfig):
    params = _high_params(config, config.n)
    model = _oracle(config)

    def one(index, gen):
        A, B = make_inputs(config.inputs, config.n, config.p, gen)
        counter = CallCounter(model)
        C = self_correct_high(A, B, counter, params, gen)
        truth = mat_mul(A, B)
        return {
            "correct": C == truth,
            "agreement": _frac(agreement(C, truth)),
            "oracle_calls": counter.calls,
        }

    outcomes, seconds = _run_trials(config, one)
    successes = sum(o["correct"] for o in outcomes)
    failures = [f"trial {o['index']}: {o['oracle_calls']} oracle calls, expected {4 * params.k}" for o in outcomes if o["oracle_calls"] != 4 * params.k]
    failures += _expectation_failures(config, successes, config.trials)
    summary = {**_success_summary(successes, config.trials), "k": params.k, "alpha": _frac(params.alpha)}
    calls = {"per_trial": [o["oracle_calls"] for o in outcomes], "expected_per_trial": 4 * params.k, "rule": "exactly 4k"}
    return outcomes, seconds, summary, calls, failures, False


def _reduce_onesided(config: ExperimentConfig):
    if config.p != 2:
        raise ConfigError("p: the one-sided reduction is defined over GF(2) only")
    params = _onesided_params(config, config.n)
    model = _oracle(config)
    if not model.one_sided:
        raise ConfigError(f"oracle.kind: {config.oracle.kind} is not a one-sided oracle")

    def one(index, gen):
        A, B = make_inputs(config.inputs, config.n, 2, gen)
        counter = CallCounter(model)
        truth = mat_mul(A, B)
        try:
            result = reduce_one_sided(A, B, counter, params, gen)
        except InvariantViolation as exc:
            return {"complete": False, "violation": str(exc), "wrong_entries": 0, "oracle_calls": counter.calls}
        if isinstance(result, Incomplete):
            known = result.partial.known
            # never-wrong: every trusted entry must match the true product
            wrong = int(np.bitwise_count(known.words & (result.partial.value.words ^ truth.words)).sum())
            return {
                "complete": False,
                "repetitions": result.repetitions,
                "unknown": result.remaining,
                "wrong_entries": wrong,
                "oracle_calls": counter.calls,
            }
        wrong = int(np.bitwise_count(result.words ^ truth.words).sum())
        return {"complete": True, "unknown": 0, "wrong_entries": wrong, "oracle_calls": counter.calls}

    outcomes, seconds = _run_trials(config, one)
    successes = sum(o["complete"] and o["wrong_entries"] == 0 for o in outcomes)
    bound = params.R * params.t**2
    failures = []
    for o in outcomes:
        if o["wrong_entries"]:
            failures.append(f"trial {o['index']}: {o['wrong_entries']} trusted entries disagree with the product")
        if "violation" in o:
            failures.append(f"trial {o['index']}: {o['violation']}")
        if o["oracle_calls"] > bound:
            failures.append(f"trial {o['index']}: {o['oracle_calls']} oracle calls exceed R*t^2 = {bound}")
    failures += _expectation_failures(config, successes, config.trials)
    incomplete = any(not o["complete"] for o in outcomes)
    summary = {
        **_success_summary(successes, config.trials),
        "delta": _frac(params.delta),
        "t": params.t,
        "k": params.k,
        "R": params.R,
        "theory_mode": params.theory_mode,
        "wrong_entries": sum(o["wrong_entries"] for o in outcomes),
    }
    calls = {"per_trial": [o["oracle_calls"] for o in outcomes], "bound_per_trial": bound, "rule": "at most R*t^2"}
    return outcomes, seconds, summary, calls, failures, incomplete


def _estimate_good(config: ExperimentConfig):
    model = _oracle(config)
    samples = _param(config, "samples", 500, kind=int)
    threshold = _param(config, "threshold", Fraction(1, 10))

    def one(index, gen):
        est = estimate_good_coordinates(model, config.n, samples, threshold, gen)
        return {"good_count": len(est.good), "good": sorted([list(c) for c in est.good])}

    outcomes, seconds = _run_trials(config, one)
    summary = {
        "samples": samples,
        "threshold": _frac(threshold),
        "good_counts": [o["good_count"] for o in outcomes],
    }
    return outcomes, seconds, summary, {}, [], False


def _lemma48(config: ExperimentConfig):
    k = _param(config, "k", 3, kind=int)
    ell = _param(config, "ell", 2 * k, kind=int)
    samples = _param(config, "samples", 10_000, kind=int)
    n = config.n
    if not 2 * k <= ell <= n:
        raise ConfigError(f"params: need 2k <= ell <= n, got k={k}, ell={ell}, n={n}")

    def one(index, gen):
        constraints = InputStructured.random(n, k, rng=gen).constraints
        rate = lemma48_hit_rate(n, k, ell, constraints, samples, gen)
        return {"hits": rate.hits, "samples": rate.trials, "frequency": _frac(rate.frequency)}

    outcomes, seconds = _run_trials(config, one)
    hits = sum(o["hits"] for o in outcomes)
    total = sum(o["samples"] for o in outcomes)
    bound = Fraction(1, 2 * 2**k)
    freq = Fraction(hits, total)
    summary = {
        "hits": hits,
        "samples": total,
        "frequency": _frac(freq),
        "frequency_float": float(freq),
        "half_width": round(wilson_half_width(hits, total), 12),
        "bound": _frac(bound),
    }
    failures = []
    want = config.expect.get("min_frequency")
    if want is not None and freq < want:
        failures.append(f"hit frequency {float(freq):.5f} below expected {float(want):.5f}")
    return outcomes, seconds, summary, {}, failures, False


def _random_subset(config: ExperimentConfig, gen) -> SubsetF2n:
    density = float(_param(config, "density", Fraction(1, 2)))
    return SubsetF2n.random(config.n, density, gen)


def _bogolyubov(config: ExperimentConfig):
    t = _param(config, "t", 3, kind=int)
    if config.n > 16 or not 2 <= t <= 8:
        raise ConfigError(f"params: bogolyubov-check needs n <= 16 and 2 <= t <= 8, got n={config.n}, t={t}")

    def one(index, gen):
        A = _random_subset(config, gen)
        if A.size == 0:
            return {"alpha": "0/1", "passed": True, "skipped": "empty set"}
        rep = bogolyubov_verify(A, t, gen)
        return {
            "alpha": _frac(rep.alpha),
            "dimension": rep.dimension,
            "min_probability": _frac(rep.min_probability),
            "main_bound": _frac(rep.main_bound),
            "points_checked": rep.points_checked,
            "passed": rep.passed,
        }

    outcomes, seconds = _run_trials(config, one)
    passed = sum(o["passed"] for o in outcomes)
    failures = [f"trial {o['index']}: bound violated" for o in outcomes if not o["passed"]]
    return outcomes, seconds, _success_summary(passed, config.trials), {}, failures, False


def _chang(config: ExperimentConfig):
    gamma = _param(config, "gamma", Fraction(1, 4))

    def one(index, gen):
        A = _random_subset(config, gen)
        if A.size == 0:
            return {"alpha": "0/1", "dimension": 0, "bound": None, "passed": True}
        dim = chang_dimension(A, gamma)
        bound = chang_bound(A.density, gamma)
        return {"alpha": _frac(A.density), "dimension": dim, "bound": bound, "passed": dim <= bound}

    outcomes, seconds = _run_trials(config, one)
    passed = sum(o["passed"] for o in outcomes)
    failures = [f"trial {o['index']}: dimension {o['dimension']} exceeds {o['bound']}" for o in outcomes if not o["passed"]]
    summary = {**_success_summary(passed, config.trials), "gamma": _frac(gamma)}
    return outcomes, seconds, summary, {}, failures, False


def _parseval(config: ExperimentConfig):
    def one(index, gen):
        A = _random_subset(config, gen)
        res = parseval_check(A)
        return {"size": A.size, "lhs": str(res.lhs), "rhs": str(res.rhs), "holds": res.holds}

    outcomes, seconds = _run_trials(config, one)
    held = sum(o["holds"] for o in outcomes)
    failures = [f"trial {o['index']}: Parseval identity fails" for o in outcomes if not o["holds"]]
    return outcomes, seconds, _success_summary(held, config.trials), {}, failures, False


_DISPATCH = {
    "reduce-high": _reduce_high,
    "reduce-onesided": _reduce_onesided,
    "estimate-good": _estimate_good,
    "lemma48": _lemma48,
    "bogolyubov-check": _bogolyubov,
    "chang-check": _chang,
    "parseval": _parseval,
}


def _direct_baseline(config: ExperimentConfig) -> Optional[float]:
    if config.experiment in ("reduce-high", "reduce-onesided"):
        return _time_direct(config.n, config.p)
    return None


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run ``config`` and, if ``config.out`` is set, write the JSON report there.

    Raises :class:`ConfigError` for invalid parameters (exit code 1).
    """
    if config.experiment == "bench":
        report = bench_overhead(config)
    else:
        start = time.perf_counter()
        outcomes, seconds, summary, calls, failures, incomplete = _DISPATCH[config.experiment](config)
        total = time.perf_counter() - start
        timing = {"total_seconds": total, "trial_seconds": seconds}
        direct = _direct_baseline(config)
        if direct is not None:
            mean = sum(seconds) / len(seconds)
            timing["direct_mul_seconds"] = direct
            timing["overhead_factor"] = mean / direct if direct > 0 else None
        if failures:
            status = "assertion_failure"
        elif incomplete:
            status = "incomplete"
        else:
            status = "pass"
        report = ExperimentReport(config.to_json(), outcomes, summary, calls, status, timing, config.seed, failures)
    if config.out:
        Path(config.out).write_text(report.dumps() + "\n", encoding="utf-8")
    return report


def bench_overhead(config: ExperimentConfig) -> ExperimentReport:
    """Direct multiplication vs the configured reduction at several sizes.

    ``params.reduction`` picks ``high`` (default) or ``onesided``;
    ``params.sizes`` overrides the size list.  Overhead factors are measured
    and reported, never asserted; oracle-call counts are checked.
    """
    reduction = config.params.get("reduction", "high")
    if reduction not in ("high", "onesided"):
        raise ConfigError(f"params.reduction: expected 'high' or 'onesided', got {reduction!r}")
    sizes = config.params.get("sizes", list(BENCH_SIZES))
    if not isinstance(sizes, list) or not all(isinstance(s, int) and s >= 2 for s in sizes):
        raise ConfigError("params.sizes: expected a list of integers >= 2")
    if reduction == "onesided" and config.p != 2:
        raise ConfigError("p: the one-sided reduction is defined over GF(2) only")
    rows, timing_rows, failures = [], [], []
    incomplete = False
    for idx, n in enumerate(sizes):
        gen = np.random.default_rng(derive_seed(config.seed, idx))
        model = build_oracle(config.oracle, n, config.p)
        counter = CallCounter(model)
        A, B = make_inputs(config.inputs, n, config.p, gen)
        direct = _time_direct(n, config.p)
        start = time.perf_counter()
        if reduction == "high":
            params = _high_params(config, n)
            C = self_correct_high(A, B, counter, params, gen)
            ok = C == mat_mul(A, B)
            bound, rule = 4 * params.k, "exactly 4k"
            if counter.calls != bound:
                failures.append(f"n={n}: {counter.calls} oracle calls, expected {bound}")
        else:
            if not model.one_sided:
                raise ConfigError(f"oracle.kind: {config.oracle.kind} is not a one-sided oracle")
            params = _onesided_params(config, n)
            result = reduce_one_sided(A, B, counter, params, gen)
            ok = not isinstance(result, Incomplete) and result == mat_mul(A, B)
            incomplete |= isinstance(result, Incomplete)
            bound, rule = params.R * params.t**2, "at most R*t^2"
            if counter.calls > bound:
                failures.append(f"n={n}: {counter.calls} oracle calls exceed {bound}")
        elapsed = time.perf_counter() - start
        rows.append({"n": n, "correct": ok, "oracle_calls": counter.calls, "call_bound": bound, "rule": rule})
        timing_rows.append(
            {"n": n, "direct_seconds": direct, "reduction_seconds": elapsed, "overhead_factor": elapsed / direct if direct > 0 else None}
        )
    status = "assertion_failure" if failures else ("incomplete" if incomplete else "pass")
    summary = {"reduction": reduction, "sizes": sizes}
    calls = {"per_size": [r["oracle_calls"] for r in rows]}
    return ExperimentReport(config.to_json(), rows, summary, calls, status, {"sizes": timing_rows}, config.seed, failures)


__all__ = [
    "BENCH_SIZES",
    "EXIT_ASSERTION",
    "EXIT_CONFIG",
    "EXIT_INCOMPLETE",
    "EXIT_PASS",
    "ExperimentReport",
    "bench_overhead",
    "make_inputs",
    "run_experiment",
    "versions",
    "wilson_half_width",
]
