"""Faulty multipliers standing in for an average-case algorithm, plus the
coordinate statistics (good coordinates, good inputs) measured on them.

Every model is deterministic: the noise at entry (i, j) is a keyed
pseudorandom function of (digest(A, B), i, j, seed).
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from ._mix import as_generator, bernoulli_mask, digest, keyed_uniforms
from .ffmat import (
    GF2,
    FieldMismatchError,
    FieldSpec,
    MatF2,
    Matrix,
    ShapeError,
    agreement,
    as_field,
    f2_rank_rows,
    mat_mul,
    matrix,
    pack_bits,
    sample_uniform,
)

_FLIP_STREAM = 1
_VALUE_STREAM = 2
_KEEP_STREAM = 3


def _check_fraction(name: str, value, lo=0, hi=1) -> Fraction:
    value = Fraction(value)
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")
    return value


class Oracle:
    """Base class: ``invoke(A, B)`` returns an approximation of ``A @ B``."""

    field: FieldSpec = GF2
    seed: int = 0
    one_sided = False

    def _validate(self, A: Matrix, B: Matrix) -> None:
        if A.field != self.field or B.field != self.field:
            raise FieldMismatchError(f"oracle works over {self.field}, got {A.field} and {B.field}")
        if A.n != A.m or B.n != B.m or A.n != B.n:
            raise ShapeError(f"oracle expects two square n x n matrices, got {A.shape} and {B.shape}")

    def _uniforms(self, A: Matrix, B: Matrix, stream: int) -> np.ndarray:
        key = digest(A.tobytes(), B.tobytes())
        return keyed_uniforms(key, self.seed, stream, A.n * B.m).reshape(A.n, B.m)

    def invoke(self, A: Matrix, B: Matrix) -> Matrix:
        raise NotImplementedError

    def __call__(self, A: Matrix, B: Matrix) -> Matrix:
        return self.invoke(A, B)


@dataclass(frozen=True)
class Exact(Oracle):
    field: FieldSpec = GF2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "field", as_field(self.field))

    def invoke(self, A, B):
        self._validate(A, B)
        return mat_mul(A, B)


@dataclass(frozen=True)
class TwoSidedFlip(Oracle):
    """Each entry is replaced by a uniformly chosen *different* value w.p. ``alpha_flip``."""

    alpha_flip: Fraction = Fraction(0)
    field: FieldSpec = GF2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "alpha_flip", _check_fraction("alpha_flip", self.alpha_flip))
        object.__setattr__(self, "field", as_field(self.field))

    def invoke(self, A, B):
        self._validate(A, B)
        C = mat_mul(A, B)
        flip = bernoulli_mask(self._uniforms(A, B, _FLIP_STREAM), self.alpha_flip)
        if self.field.p == 2:
            return MatF2(C.n, C.m, C.words ^ pack_bits(flip))
        p = self.field.p
        offset = 1 + (self._uniforms(A, B, _VALUE_STREAM) % np.uint64(p - 1)).astype(np.int64)
        out = np.where(flip, (C.data + offset) % p, C.data)
        return matrix(out, self.field)


class _OneSided(Oracle):
    one_sided = True
    rho: Fraction

    def _masked_product(self, A: MatF2, B: MatF2) -> MatF2:
        self._validate(A, B)
        C = mat_mul(A, B)
        keep = bernoulli_mask(self._uniforms(A, B, _KEEP_STREAM), self.rho)
        return MatF2(C.n, C.m, C.words & pack_bits(keep))


@dataclass(frozen=True)
class OneSidedMask(_OneSided):
    """Every 1-entry of ``A @ B`` survives w.p. ``rho``; 0-entries are always 0."""

    rho: Fraction = Fraction(1)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_fraction("rho", self.rho))

    def invoke(self, A, B):
        return self._masked_product(A, B)


@dataclass(frozen=True)
class CoordinateRestricted(_OneSided):
    """OneSidedMask inside ``good_set``, identically zero outside it."""

    good_set: frozenset = frozenset()
    rho: Fraction = Fraction(1)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_fraction("rho", self.rho))
        object.__setattr__(self, "good_set", frozenset((int(i), int(j)) for i, j in self.good_set))

    def invoke(self, A, B):
        C = self._masked_product(A, B)
        inside = np.zeros((C.n, C.m), dtype=bool)
        for i, j in self.good_set:
            if i < C.n and j < C.m:
                inside[i, j] = True
        return MatF2(C.n, C.m, C.words & pack_bits(inside))


@dataclass(frozen=True)
class InputStructured(_OneSided):
    """Answers (as OneSidedMask) only when A satisfies every linear constraint.

    Constraint ``W`` is satisfied when ``sum_ij W_ij A_ij = 0`` over GF(2).
    """

    constraints: tuple = ()
    rho: Fraction = Fraction(1)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rho", _check_fraction("rho", self.rho))
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @classmethod
    def random(cls, n: int, count: int, rho=Fraction(1), seed: int = 0, rng=None) -> "InputStructured":
        """``count`` linearly independent random functionals on n x n matrices."""
        gen = as_generator(seed if rng is None else rng)
        if count > n * n:
            raise ValueError(f"at most {n * n} independent constraints on {n}x{n} matrices")
        picked: list[MatF2] = []
        while len(picked) < count:
            W = sample_uniform(n, n, GF2, gen)
            ints = [_as_int(M) for M in picked + [W]]
            if f2_rank_rows(ints) == len(ints):
                picked.append(W)
        return cls(tuple(picked), rho, seed)

    def satisfied_by(self, A: MatF2) -> bool:
        return all(int(np.bitwise_count(W.words & A.words).sum()) % 2 == 0 for W in self.constraints)

    def invoke(self, A, B):
        C = self._masked_product(A, B)
        if self.satisfied_by(A):
            return C
        return MatF2(C.n, C.m, np.zeros_like(C.words))


def _as_int(M: MatF2) -> int:
    return int.from_bytes(M.tobytes(), "little")


class CallCounter:
    """Wraps an oracle and counts invocations (thread-safe)."""

    def __init__(self, oracle):
        self.oracle = oracle
        self.calls = 0
        self._lock = threading.Lock()

    @property
    def field(self):
        return self.oracle.field

    @property
    def one_sided(self):
        return self.oracle.one_sided

    def invoke(self, A, B):
        with self._lock:
            self.calls += 1
        return self.oracle.invoke(A, B)

    __call__ = invoke


def _invoke(model, A, B):
    return model.invoke(A, B)


# --- agreement and coordinate statistics ----------------------------------


@dataclass(frozen=True)
class AgreementEstimate:
    mean: Fraction
    half_width: float
    trials: int


def estimate_average_agreement(model, n: int, trials: int, rng=None) -> AgreementEstimate:
    """Mean of agr(model(A, B), A @ B) over uniform A, B with a 95% half-width.

    The half-width treats the ``trials * n * n`` entries as Bernoulli draws.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    gen = as_generator(rng)
    total = Fraction(0)
    for _ in range(trials):
        A = sample_uniform(n, n, model.field, gen)
        B = sample_uniform(n, n, model.field, gen)
        total += agreement(_invoke(model, A, B), mat_mul(A, B))
    mean = total / trials
    m = float(mean)
    half = 1.96 * math.sqrt(max(m * (1 - m), 0.0) / (trials * n * n))
    return AgreementEstimate(mean, half, trials)


@dataclass(frozen=True)
class CoordinateStats:
    """Exhaustive statistics of a GF(2) oracle at a fixed small n.

    ``p[i][j]`` is Pr[ALG(A,B)_ij = 1] over all input pairs, ``good`` is the
    set of coordinates with p > delta/2, ``x_density[i][j]`` is the fraction
    of A with Pr_B[ALG(A,B)_ij = 1] >= delta/4 and ``y_densities[(i,j)]``
    lists Pr_B[ALG(A,B)_ij = 1] for every such A.
    """

    n: int
    p: tuple
    delta: Fraction
    good: frozenset
    x_density: tuple
    y_densities: dict = dc_field(default_factory=dict)

    def good_claim_holds(self) -> bool:
        return len(self.good) >= self.delta / 2 * self.n**2

    def x_claim_holds(self) -> bool:
        return all(self.x_density[i][j] >= self.delta / 4 for i, j in self.good)

    def y_claim_holds(self) -> bool:
        return all(d >= self.delta / 4 for ds in self.y_densities.values() for d in ds)


def all_f2_matrices(n: int) -> list[MatF2]:
    """Every n x n GF(2) matrix, index bits in row-major order."""
    cells = n * n
    idx = np.arange(1 << cells, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(cells)) & 1).reshape(-1, n, n)
    return [MatF2.from_bits(b) for b in bits]


def exact_coordinate_stats(model, n: int) -> CoordinateStats:
    """Enumerate all 2**(2n^2) input pairs (n <= 3, GF(2) only)."""
    if model.field != GF2:
        raise ValueError("exhaustive statistics are only defined over GF(2)")
    if n > 3:
        raise ValueError(f"exhaustive mode needs n <= 3, got n={n}")
    mats = all_f2_matrices(n)
    size = len(mats)
    ones = np.zeros((size, n, n), dtype=np.int64)
    for a, A in enumerate(mats):
        for B in mats:
            ones[a] += _invoke(model, A, B).to_array()
    pairs = size * size
    col = ones.sum(axis=0)
    p = tuple(tuple(Fraction(int(col[i, j]), pairs) for j in range(n)) for i in range(n))
    delta = sum((x for row in p for x in row), Fraction(0)) / (n * n)
    good = frozenset((i, j) for i in range(n) for j in range(n) if p[i][j] > delta / 2)
    x_density = []
    y_densities = {}
    for i in range(n):
        row = []
        for j in range(n):
            per_a = [Fraction(int(ones[a, i, j]), size) for a in range(size)]
            members = [d for d in per_a if d >= delta / 4]
            row.append(Fraction(len(members), size))
            y_densities[(i, j)] = tuple(members)
        x_density.append(tuple(row))
    return CoordinateStats(n, p, delta, good, tuple(x_density), y_densities)


@dataclass(frozen=True)
class GoodCoordinateEstimate:
    good: frozenset
    estimates: np.ndarray
    samples: int


def estimate_good_coordinates(model, n: int, samples: int, threshold, rng=None) -> GoodCoordinateEstimate:
    """Sampled surrogate for the good set: coordinates whose estimate exceeds ``threshold``."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    gen = as_generator(rng)
    counts = np.zeros((n, n), dtype=np.int64)
    for _ in range(samples):
        A = sample_uniform(n, n, model.field, gen)
        B = sample_uniform(n, n, model.field, gen)
        counts += _invoke(model, A, B).to_array() != 0
    est = counts / samples
    threshold = Fraction(threshold)
    good = frozenset(
        (i, j) for i in range(n) for j in range(n) if Fraction(int(counts[i, j]), samples) > threshold
    )
    return GoodCoordinateEstimate(good, est, samples)


def zero_oracle(seed: int = 0) -> OneSidedMask:
    """The trivial one-sided oracle that always answers 0."""
    return OneSidedMask(Fraction(0), seed)
