"""Worst-case GF(2) multiplier from a low-agreement, one-sided-error oracle.

A one-sided oracle never reports 1 where the true entry is 0.  The good
coordinate pass writes ``M_A = A - L_A`` and ``M_B = B - L_B`` with random
low-rank ``L_A``, ``L_B``, splits ``M_A`` into t shares and ``M_B`` into t
independent share lists, and queries the oracle on all t^2 share pairs.  An
entry is trusted only where all t^2 answers are 1: then every answer is
correct and their sum is ``(M_A M_B)_ij``.  The low-rank corrections are
added back in factored form.

The outer loop repeats the pass on randomly shifted inputs until every entry
has been filled or the repetition budget runs out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ._mix import as_generator, derive_seed, draw_seed
from .ffmat import (
    GF2,
    FieldMismatchError,
    LowRankMat,
    MatF2,
    ShiftPair,
    cyclic_shift,
    f2_rank_rows,
    lowrank_mul,
    lowrank_product,
    mat_add,
    mat_sub,
    mat_sum,
    sample_low_rank,
    sample_uniform,
)

CHANG_CONSTANT = 8
DEFAULT_BUDGET = 1000


class InvariantViolation(RuntimeError):
    """Two trusted writes disagreed: the oracle broke its one-sided contract."""


def ceil_log2(x) -> int:
    """Smallest integer e with 2**e >= x, computed exactly."""
    x = Fraction(x)
    if x <= 0:
        raise ValueError("log of a nonpositive number")
    e = 0
    while Fraction(2) ** e < x:
        e += 1
    while Fraction(2) ** (e - 1) >= x:
        e -= 1
    return e


@dataclass(frozen=True)
class OneSidedParams:
    """Parameters of the one-sided reduction.

    ``t`` shares, low-rank parameter ``k`` (the masks have rank <= 2k and
    <= 2tk), repetition budget ``R``.  ``theory_mode`` insists on the share
    count and rank the completeness analysis needs.
    """

    delta: Fraction
    t: int
    k: int
    R: int
    delta0_hint: Optional[Fraction] = None
    early_exit: bool = True
    theory_mode: bool = False

    def __post_init__(self):
        delta = Fraction(self.delta)
        object.__setattr__(self, "delta", delta)
        if not 0 < delta <= Fraction(1, 2):
            raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
        if self.t < 1 or self.k < 0 or self.R < 1:
            raise ValueError(f"need t >= 1, k >= 0, R >= 1; got t={self.t}, k={self.k}, R={self.R}")
        if self.delta0_hint is not None:
            object.__setattr__(self, "delta0_hint", Fraction(self.delta0_hint))
        if self.theory_mode:
            # t > log2(4/delta) + 2  <=>  2**(t-2) * delta > 4
            if not Fraction(2) ** (self.t - 2) * delta > 4:
                raise ValueError(f"theory mode needs t > log2(4/delta) + 2, got t={self.t}")
            want = theory_rank(delta)
            if self.k != want:
                raise ValueError(f"theory mode needs k = {want}, got k={self.k}")


def theory_shares(delta) -> int:
    return ceil_log2(4 / Fraction(delta)) + 3


def theory_rank(delta) -> int:
    return math.ceil(CHANG_CONSTANT * math.log2(4 / Fraction(delta)))


def derive_params(delta, n: int, overrides: Optional[dict] = None) -> OneSidedParams:
    """Theory defaults for (t, k, R), with any field overridable.

    Defaults: t = ceil(log2(4/delta)) + 3, k = ceil(8 log2(4/delta)), and
    R = ceil(3 ln(n^3) / (delta * delta0_hint)) when a hint is given, else
    ``DEFAULT_BUDGET``.  Overrides switch theory mode off unless it is
    requested explicitly.
    """
    delta = Fraction(delta)
    if not 0 < delta <= Fraction(1, 2):
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    overrides = dict(overrides or {})
    hint = overrides.pop("delta0_hint", None)
    fields = {
        "delta": delta,
        "t": theory_shares(delta),
        "k": theory_rank(delta),
        "delta0_hint": None if hint is None else Fraction(hint),
        "theory_mode": not ({"t", "k"} & overrides.keys()),
    }
    if hint is not None:
        fields["R"] = math.ceil(3 * math.log(n**3) / float(delta * Fraction(hint)))
    else:
        fields["R"] = DEFAULT_BUDGET
    unknown = overrides.keys() - {"t", "k", "R", "early_exit", "theory_mode"}
    if unknown:
        raise ValueError(f"unknown parameter overrides: {sorted(unknown)}")
    fields.update(overrides)
    return OneSidedParams(**fields)


@dataclass(frozen=True)
class TernaryMat:
    """n x n matrix over {0, 1, unknown}; ``value`` is zero wherever ``known`` is."""

    known: MatF2
    value: MatF2

    def __post_init__(self):
        if self.known.shape != self.value.shape:
            raise ValueError("known/value shape mismatch")
        object.__setattr__(self, "value", MatF2(self.value.n, self.value.m, self.value.words & self.known.words))

    @classmethod
    def unknown(cls, n: int) -> "TernaryMat":
        z = MatF2(n, n, np.zeros((n, (n + 63) // 64), dtype=np.uint64))
        return cls(z, z)

    @property
    def n(self) -> int:
        return self.known.n

    def known_count(self) -> int:
        return int(np.bitwise_count(self.known.words).sum())

    def unknown_count(self) -> int:
        return self.known.n * self.known.m - self.known_count()

    def to_array(self) -> np.ndarray:
        """Entries as int8 with -1 for unknown."""
        out = self.value.to_array().astype(np.int8)
        out[self.known.to_array() == 0] = -1
        return out

    def complete(self) -> Optional[MatF2]:
        return self.value if self.unknown_count() == 0 else None


@dataclass(frozen=True)
class ShareSet:
    """R_1..R_t summing to M_A and, per r, S^(r)_1..S^(r)_t summing to M_B."""

    r_shares: tuple
    s_shares: tuple


def share_split(M, t: int, rng=None) -> list:
    """t - 1 uniform shares plus the one that completes the sum to ``M``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    gen = as_generator(rng)
    shares = [sample_uniform(M.n, M.m, M.field, gen) for _ in range(t - 1)]
    last = M if not shares else mat_sub(M, mat_sum(shares))
    return shares + [last]


def sample_share_set(M_A, M_B, t: int, rng=None) -> ShareSet:
    gen = as_generator(rng)
    r_shares = tuple(share_split(M_A, t, gen))
    s_shares = tuple(tuple(share_split(M_B, t, gen)) for _ in range(t))
    return ShareSet(r_shares, s_shares)


@dataclass(frozen=True)
class PassTrace:
    """Internals of one good-coordinate pass, kept for inspection in tests."""

    L_A: LowRankMat
    L_B: LowRankMat
    M_A: MatF2
    M_B: MatF2
    shares: ShareSet
    raw: TernaryMat


def _check_f2(A, B, model) -> None:
    if A.field != GF2 or B.field != GF2 or model.field != GF2:
        raise FieldMismatchError("the one-sided reduction works over GF(2) only")
    if A.shape != B.shape or A.n != A.m:
        raise ValueError(f"expected two square matrices of equal size, got {A.shape} and {B.shape}")


def good_coordinate_pass(A: MatF2, B: MatF2, model, params: OneSidedParams, rng=None, trace: Optional[list] = None) -> TernaryMat:
    """One pass: trusted entries of ``A @ B`` and unknown elsewhere.

    Makes exactly ``t**2`` oracle calls.  Mask ranks 2k and 2tk are capped at
    n (beyond that the mask is simply uniform).
    """
    _check_f2(A, B, model)
    gen = as_generator(rng)
    n, t, k = A.n, params.t, params.k
    L_A = sample_low_rank(n, n, min(2 * k, n), GF2, gen)
    L_B = sample_low_rank(n, n, min(2 * t * k, n), GF2, gen)
    # the masks are expanded only to form the oracle inputs; corrections stay factored
    M_A = mat_sub(A, L_A.dense()) if L_A.k else A
    M_B = mat_sub(B, L_B.dense()) if L_B.k else B
    shares = sample_share_set(M_A, M_B, t, gen)

    all_ones = np.full(A.words.shape, np.uint64(0xFFFFFFFFFFFFFFFF))
    parity = np.zeros(A.words.shape, dtype=np.uint64)
    for r in range(t):
        for s in range(t):
            out = model.invoke(shares.r_shares[r], shares.s_shares[r][s])
            all_ones &= out.words
            parity ^= out.words
    raw = TernaryMat(MatF2(n, n, all_ones), MatF2(n, n, parity))

    correction = mat_add(
        mat_add(lowrank_mul(L_B, M_A, "right"), lowrank_mul(L_A, M_B, "left")),
        lowrank_product(L_A, L_B),
    )
    result = TernaryMat(raw.known, MatF2(n, n, raw.value.words ^ correction.words))
    if trace is not None:
        trace.append(PassTrace(L_A, L_B, M_A, M_B, shares, raw))
    return result


@dataclass(frozen=True)
class Incomplete:
    """The repetition budget ran out with ``remaining`` entries still unknown."""

    remaining: int
    partial: TernaryMat
    repetitions: int


def reduce_one_sided(A: MatF2, B: MatF2, model, params: OneSidedParams, rng=None, history: Optional[list] = None):
    """``A @ B`` (a MatF2) or an :class:`Incomplete` after the budget runs out.

    Repetition ``r`` runs the pass on ``A^(pi,0), B^(0,sigma)`` with its own
    generator ``derive_seed(seed, r)`` and copies trusted entries back to
    their unshifted positions.  The first write wins; a later write that
    disagrees raises :class:`InvariantViolation`.  ``history``, if given,
    receives the number of known entries after each repetition.
    """
    _check_f2(A, B, model)
    seed = draw_seed(rng)
    n = A.n
    known = np.zeros(A.words.shape, dtype=np.uint64)
    value = np.zeros(A.words.shape, dtype=np.uint64)
    full = MatF2(n, n, np.full(A.words.shape, np.uint64(0xFFFFFFFFFFFFFFFF))).words
    used = 0
    for r in range(params.R):
        gen = np.random.default_rng(derive_seed(seed, r))
        pi = int(gen.integers(0, n))
        sigma = int(gen.integers(0, n))
        As = cyclic_shift(A, ShiftPair(pi, 0))
        Bs = cyclic_shift(B, ShiftPair(0, sigma))
        found = good_coordinate_pass(As, Bs, model, params, gen)
        back = ShiftPair(pi, sigma).inverse(n, n)
        new_known = cyclic_shift(found.known, back).words
        new_value = cyclic_shift(found.value, back).words
        clash = known & new_known & (value ^ new_value)
        if clash.any():
            raise InvariantViolation(f"conflicting trusted writes at repetition {r}")
        fresh = new_known & ~known
        known |= fresh
        value |= new_value & fresh
        used = r + 1
        if history is not None:
            history.append(int(np.bitwise_count(known).sum()))
        if params.early_exit and np.array_equal(known, full):
            break
    partial = TernaryMat(MatF2(n, n, known), MatF2(n, n, value))
    if np.array_equal(known, full):
        return partial.value
    return Incomplete(partial.unknown_count(), partial, used)


# --- subspace hitting experiment -------------------------------------------


@dataclass(frozen=True)
class HitRate:
    hits: int
    trials: int
    bound: Fraction
    half_width: float

    @property
    def frequency(self) -> Fraction:
        return Fraction(self.hits, self.trials)


def _constraint_rows(constraints, n: int) -> np.ndarray:
    rows = np.zeros((len(constraints), n * n), dtype=np.uint8)
    for c, W in enumerate(constraints):
        arr = W.to_array() if isinstance(W, MatF2) else np.asarray(W, dtype=np.uint8)
        if arr.shape != (n, n):
            raise ValueError(f"constraint {c} has shape {arr.shape}, expected {(n, n)}")
        rows[c] = arr.reshape(-1) % 2
    return rows


def lemma48_hit_rate(n: int, k: int, ell: int, constraints, trials: int, rng=None, A: Optional[MatF2] = None, batch: int = 4096) -> HitRate:
    """Frequency with which ``A - L`` satisfies ``k`` independent linear constraints.

    ``L`` is a rank <= ell mask drawn column-wise as in :func:`sample_low_rank`
    (first ell columns uniform, the rest uniform combinations of them),
    sampled here in vectorized batches.  ``A`` defaults to a fixed uniform
    matrix drawn from ``rng``.  The guaranteed lower bound is 1/(2 * 2**k).
    """
    if ell < 2 * k:
        raise ValueError(f"need ell >= 2k, got ell={ell}, k={k}")
    if ell > n:
        raise ValueError(f"ell={ell} exceeds n={n}")
    if len(constraints) != k:
        raise ValueError(f"expected {k} constraints, got {len(constraints)}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rows = _constraint_rows(constraints, n)
    row_ints = [int.from_bytes(np.packbits(r, bitorder="little").tobytes(), "little") for r in rows]
    if f2_rank_rows(row_ints) != k:
        raise ValueError("constraints are linearly dependent")
    gen = as_generator(rng)
    if A is None:
        A = sample_uniform(n, n, GF2, gen)
    a_vec = A.to_array().reshape(-1).astype(np.int64)
    offset = (rows.astype(np.int64) @ a_vec) % 2
    W = rows.astype(np.float32).T  # (n*n, k)
    hits = 0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        base = gen.integers(0, 2, size=(b, n, ell), dtype=np.int8).astype(np.float32)
        coeffs = np.zeros((b, ell, n), dtype=np.float32)
        coeffs[:, :, :ell] = np.eye(ell, dtype=np.float32)
        if n > ell:
            coeffs[:, :, ell:] = gen.integers(0, 2, size=(b, ell, n - ell), dtype=np.int8)
        L = np.matmul(base, coeffs).reshape(b, n * n) % 2
        vals = (np.rint(L @ W).astype(np.int64) + offset) % 2
        hits += int(np.count_nonzero(~vals.any(axis=1)))
        done += b
    freq = hits / trials
    half = 1.96 * math.sqrt(max(freq * (1 - freq), 0.0) / trials)
    return HitRate(hits, trials, Fraction(1, 2 * 2**k), half)
