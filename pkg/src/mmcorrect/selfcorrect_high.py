"""Worst-case multiplier from a high-agreement, two-sided-error oracle.

Each repetition masks the inputs with fresh uniform R, S, applies random
cyclic shifts, and recombines four oracle answers by the telescope

    (A+R)(B+S) - R(B+S) - (A+R)S + RS = AB.

Every oracle call sees a uniformly distributed input pair, so an oracle that
is right on a 1 - alpha fraction of entries on average is right at a fixed
entry of one repetition with probability >= 1 - 4 alpha.  A per-entry
plurality vote over k repetitions finishes the job.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ._mix import derive_seed, draw_seed
from .ffmat import (
    MatF2,
    Matrix,
    ShiftPair,
    cyclic_shift,
    mat_add,
    mat_sub,
    matrix,
    pack_bits,
    sample_uniform,
)

ALPHA_LIMIT = Fraction(1, 8)


def _check_alpha(alpha) -> Fraction:
    alpha = Fraction(alpha)
    if not 0 < alpha < ALPHA_LIMIT:
        raise ValueError(f"alpha must lie in (0, 1/8), got {alpha}")
    return alpha


def choose_repetitions(n: int, alpha, failure_target=None) -> int:
    """Smallest odd k with exp(-2 k (1/2 - 4 alpha)^2) <= failure_target.

    Hoeffding bound for a majority of k independent repetitions, each correct
    with probability at least 1 - 4 alpha.  ``failure_target`` defaults to the
    per-entry budget 1/n^3.
    """
    alpha = _check_alpha(alpha)
    if n < 2:
        raise ValueError("n must be >= 2")
    target = Fraction(1, n**3) if failure_target is None else Fraction(failure_target)
    if not 0 < target <= 1:
        raise ValueError(f"failure_target must lie in (0, 1], got {target}")
    margin = Fraction(1, 2) - 4 * alpha
    k = math.ceil(math.log(1 / target) / (2 * float(margin * margin)))
    k = max(k, 1)
    return k if k % 2 else k + 1


@dataclass(frozen=True)
class HighParams:
    alpha: Fraction
    k: int
    failure_target: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_alpha(self.alpha))
        if self.k < 1:
            raise ValueError(f"repetition count must be >= 1, got {self.k}")
        if self.failure_target is not None:
            object.__setattr__(self, "failure_target", Fraction(self.failure_target))

    @classmethod
    def for_size(cls, n: int, alpha, failure_target=None, k: Optional[int] = None) -> "HighParams":
        if k is None:
            k = choose_repetitions(n, alpha, failure_target)
        return cls(Fraction(alpha), k, failure_target)


def correction_round(A: Matrix, B: Matrix, model, rng: np.random.Generator) -> Matrix:
    """One repetition: four masked, shifted oracle calls, then un-shift."""
    n = A.n
    R = sample_uniform(n, n, A.field, rng)
    S = sample_uniform(n, n, A.field, rng)
    pi = int(rng.integers(0, n))
    sigma = int(rng.integers(0, n))
    row_shift = ShiftPair(pi, 0)
    col_shift = ShiftPair(0, sigma)
    AR = cyclic_shift(mat_add(A, R), row_shift)
    BS = cyclic_shift(mat_add(B, S), col_shift)
    Rs = cyclic_shift(R, row_shift)
    Ss = cyclic_shift(S, col_shift)
    M = mat_sub(model.invoke(AR, BS), model.invoke(Rs, BS))
    M = mat_add(mat_sub(M, model.invoke(AR, Ss)), model.invoke(Rs, Ss))
    return cyclic_shift(M, ShiftPair(pi, sigma).inverse(n, n))


def plurality_vote(mats) -> Matrix:
    """Per-entry most frequent value; ties go to the smallest residue."""
    mats = list(mats)
    if not mats:
        raise ValueError("nothing to vote on")
    first = mats[0]
    if isinstance(first, MatF2):
        count = np.zeros(first.shape, dtype=np.int64)
        for M in mats:
            count += M.to_array()
        # a tie (even count) goes to 0, the smaller residue
        return MatF2(first.n, first.m, pack_bits(2 * count > len(mats)))
    stack = np.sort(np.stack([M.data for M in mats]), axis=0)
    run = np.ones(stack.shape, dtype=np.int64)
    for a in range(1, len(mats)):
        run[a] = np.where(stack[a] == stack[a - 1], run[a - 1] + 1, 1)
    # argmax takes the first maximal run end, i.e. the smallest tied value
    best = np.argmax(run, axis=0)
    winner = np.take_along_axis(stack, best[None], axis=0)[0]
    return matrix(winner, first.field)


def self_correct_high(A: Matrix, B: Matrix, model, params: HighParams, rng=None, workers: int = 1) -> Matrix:
    """Worst-case product of square A, B from a high-agreement oracle.

    Makes exactly ``4 * params.k`` oracle calls.  Repetition ``r`` draws its
    randomness from ``derive_seed(seed, r)``, so the result does not depend
    on ``workers``.
    """
    if A.field != B.field or A.field != model.field:
        raise ValueError(f"field mismatch: {A.field}, {B.field}, oracle {model.field}")
    if A.shape != B.shape or A.n != A.m:
        raise ValueError(f"expected two square matrices of equal size, got {A.shape} and {B.shape}")
    if A.field.p == 2 and params.k % 2 == 0:
        raise ValueError("over GF(2) the repetition count must be odd")
    seed = draw_seed(rng)

    def one(r: int) -> Matrix:
        return correction_round(A, B, model, np.random.default_rng(derive_seed(seed, r)))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rounds = list(pool.map(one, range(params.k)))
    else:
        rounds = [one(r) for r in range(params.k)]
    return plurality_vote(rounds)
