"""Exact Fourier analysis of subsets of F_2^n.

Spectra are unnormalized integers, S(r) = sum_{x in A} (-1)^<x,r>, i.e. the
usual coefficient times 2^n, so every identity below is checked in integer
or rational arithmetic with no tolerance.

Vectors of F_2^n are ints; bit i is coordinate i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from ._mix import as_generator

MAX_N = 22
ENUMERATION_CAP = 20
SAMPLE_POINTS = 1 << 16
RANDOM_SIGN_TRIES = 1 << 12


def _parity(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x) & 1


# --- subsets ----------------------------------------------------------------


@dataclass(frozen=True)
class SubsetF2n:
    n: int
    members: np.ndarray  # bool, length 2**n

    def __post_init__(self):
        if not 0 <= self.n <= MAX_N:
            raise ValueError(f"n must lie in [0, {MAX_N}], got {self.n}")
        arr = np.array(self.members, dtype=bool).reshape(-1)
        if arr.size != 1 << self.n:
            raise ValueError(f"membership vector must have length 2**{self.n}")
        arr.flags.writeable = False
        object.__setattr__(self, "members", arr)

    @classmethod
    def from_elements(cls, n: int, elements) -> "SubsetF2n":
        members = np.zeros(1 << n, dtype=bool)
        members[np.asarray(list(elements), dtype=np.int64)] = True
        return cls(n, members)

    @classmethod
    def full(cls, n: int) -> "SubsetF2n":
        return cls(n, np.ones(1 << n, dtype=bool))

    @classmethod
    def random(cls, n: int, density: float, rng=None) -> "SubsetF2n":
        gen = as_generator(rng)
        return cls(n, gen.random(1 << n) < density)

    @classmethod
    def affine_subspace(cls, n: int, constraints) -> "SubsetF2n":
        """{x : <x, r> = s for every (r, s) in constraints}."""
        xs = np.arange(1 << n, dtype=np.int64)
        members = np.ones(1 << n, dtype=bool)
        for r, s in constraints:
            members &= _parity(xs & r) == (s & 1)
        return cls(n, members)

    @classmethod
    def linear_subspace(cls, n: int, dual) -> "SubsetF2n":
        """The annihilator of the vectors in ``dual``."""
        return cls.affine_subspace(n, [(r, 0) for r in dual])

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.members))

    @property
    def density(self) -> Fraction:
        return Fraction(self.size, 1 << self.n)

    def elements(self) -> np.ndarray:
        return np.flatnonzero(self.members)

    def __contains__(self, x) -> bool:
        return bool(self.members[int(x)])


# --- transform --------------------------------------------------------------


def _butterfly(values: np.ndarray, n: int) -> np.ndarray:
    a = values.copy()
    h = 1
    while h < (1 << n):
        view = a.reshape(-1, 2, h)
        x = view[:, 0, :].copy()
        y = view[:, 1, :]
        view[:, 0, :] = x + y
        view[:, 1, :] = x - y
        h *= 2
    return a


@dataclass(frozen=True)
class IntSpectrum:
    n: int
    values: np.ndarray  # int64, length 2**n

    def __getitem__(self, r) -> int:
        return int(self.values[r])

    def inverse(self) -> np.ndarray:
        """Recover the indicator: applying the transform again gives 2^n * 1_A."""
        twice = _butterfly(self.values, self.n)
        if np.any(twice % (1 << self.n)):
            raise ArithmeticError("spectrum is not the transform of a 0/1 function")
        return twice >> self.n


def wht(A: SubsetF2n) -> IntSpectrum:
    """Integer Walsh-Hadamard transform in O(n 2^n)."""
    if A.n > MAX_N:
        raise ValueError(f"n={A.n} exceeds {MAX_N}")
    return IntSpectrum(A.n, _butterfly(A.members.astype(np.int64), A.n))


def wht_direct(A: SubsetF2n) -> np.ndarray:
    """O(4^n) direct summation; reference for small n."""
    xs = A.elements()
    rs = np.arange(1 << A.n, dtype=np.int64)
    signs = 1 - 2 * _parity(rs[:, None] & xs[None, :]).astype(np.int64)
    return signs.sum(axis=1)


def _sum_squares(values: np.ndarray) -> int:
    # squares fit in int64 (|S| <= 2**22); split into 32-bit halves before summing
    sq = values.astype(np.int64) ** 2
    lo = int((sq & 0xFFFFFFFF).sum())
    hi = int((sq >> 32).sum())
    return (hi << 32) + lo


@dataclass(frozen=True)
class ParsevalResult:
    lhs: int
    rhs: int

    @property
    def holds(self) -> bool:
        return self.lhs == self.rhs

    def __bool__(self):
        return self.holds


def parseval_check(A: SubsetF2n, spectrum: Optional[IntSpectrum] = None) -> ParsevalResult:
    """sum_r S(r)^2 against |A| * 2^n, both as exact integers."""
    spec = wht(A) if spectrum is None else spectrum
    return ParsevalResult(_sum_squares(spec.values), A.size << A.n)


def _threshold_mask(spec: IntSpectrum, gamma: Fraction, strict: bool) -> np.ndarray:
    # |S(r)| >= gamma * 2^n  <=>  |S(r)| * den >= num * 2^n
    gamma = Fraction(gamma)
    rhs = gamma.numerator << spec.n
    mag = np.abs(spec.values)
    if gamma.denominator << spec.n < 2**62 and rhs < 2**62:
        lhs = mag * gamma.denominator
        return lhs > rhs if strict else lhs >= rhs
    lhs = [int(x) * gamma.denominator for x in mag]
    return np.array([x > rhs if strict else x >= rhs for x in lhs], dtype=bool)


def spectrum_above(A: SubsetF2n, gamma, strict: bool = False, spectrum: Optional[IntSpectrum] = None) -> np.ndarray:
    """Characters r with |coefficient| >= gamma (or > gamma when ``strict``)."""
    gamma = Fraction(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    spec = wht(A) if spectrum is None else spectrum
    return np.flatnonzero(_threshold_mask(spec, gamma, strict))


# --- GF(2) span helpers -----------------------------------------------------


class XorBasis:
    """Incremental echelon basis that remembers how each vector was built.

    ``combo[pivot]`` is a bitmask over the indices of the independent inputs
    (in insertion order) whose sum is the stored basis vector.
    """

    def __init__(self):
        self.vec: dict[int, int] = {}
        self.combo: dict[int, int] = {}
        self.members: list[int] = []

    def reduce(self, v: int) -> tuple[int, int]:
        combo = 0
        while v:
            top = v.bit_length() - 1
            if top not in self.vec:
                break
            v ^= self.vec[top]
            combo ^= self.combo[top]
        return v, combo

    def add(self, v: int) -> bool:
        rest, combo = self.reduce(v)
        if rest == 0:
            return False
        idx = len(self.members)
        self.members.append(v)
        self.vec[rest.bit_length() - 1] = rest
        self.combo[rest.bit_length() - 1] = combo ^ (1 << idx)
        return True

    def express(self, v: int) -> Optional[int]:
        """Bitmask of members summing to ``v``, or None when v is outside the span."""
        rest, combo = self.reduce(v)
        return combo if rest == 0 else None

    @property
    def dimension(self) -> int:
        return len(self.members)


def span_dimension(vectors) -> int:
    basis = XorBasis()
    for v in vectors:
        basis.add(int(v))
    return basis.dimension


def chang_dimension(A: SubsetF2n, gamma) -> int:
    """dim span{r : |coefficient(r)| >= gamma * alpha}."""
    gamma = Fraction(gamma)
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if A.size == 0:
        raise ValueError("empty set has density 0")
    spec = spectrum_above(A, gamma * A.density)
    return span_dimension(spec)


def chang_bound(alpha, gamma, constant: int = 8) -> float:
    return constant * math.log2(1 / Fraction(alpha)) / float(Fraction(gamma)) ** 2


# --- Bogolyubov subspace ----------------------------------------------------


@dataclass(frozen=True)
class SignAssignment:
    """Signs s_r on the large spectrum R, fixed on an independent basis and
    extended to the rest of R by linearity."""

    t: int
    large: tuple       # R, the nonzero characters with |coefficient| > alpha/2
    basis: tuple       # R', maximal independent subset of R in order of appearance
    basis_signs: tuple
    signs: dict        # r -> s_r for every r in R
    total: int         # sum_{r in R} S(r)^t (-1)^{s_r}
    searched: int      # candidate assignments evaluated


def large_spectrum(A: SubsetF2n, spectrum: Optional[IntSpectrum] = None) -> np.ndarray:
    """R = {r != 0 : |coefficient(r)| > alpha/2} (strict)."""
    spec = wht(A) if spectrum is None else spectrum
    R = spectrum_above(A, A.density / 2, strict=True, spectrum=spec)
    return R[R != 0]


def _signed_totals(weights: list, combos: list, candidates: np.ndarray) -> list:
    # for each candidate s (bitmask over R'), sum_r w_r * (-1)^{<c_r, s>}
    combo_arr = np.array(combos, dtype=np.int64)
    flips = _parity(combo_arr[:, None] & candidates[None, :]).astype(bool)
    totals = []
    for col in range(candidates.size):
        f = flips[:, col]
        totals.append(sum(w for w, neg in zip(weights, f) if not neg) - sum(w for w, neg in zip(weights, f) if neg))
    return totals


def sign_assignment(A: SubsetF2n, t: int, rng=None, spectrum: Optional[IntSpectrum] = None) -> SignAssignment:
    """Signs with sum_{r in R} S(r)^t (-1)^{s_r} >= 0, consistent under linear combinations.

    Even t: all zeros.  Odd t: exhaustive search in increasing order of the
    basis assignment when |R'| <= 20, otherwise random search.  Such an
    assignment always exists because the signed sum averages to zero.
    """
    if t < 3:
        raise ValueError("t must be >= 3")
    spec = wht(A) if spectrum is None else spectrum
    R = [int(r) for r in large_spectrum(A, spec)]
    basis = XorBasis()
    for r in R:
        basis.add(r)
    combos = [basis.express(r) for r in R]
    weights = [int(spec.values[r]) ** t for r in R]
    d = basis.dimension

    def build(s_bits: int, total: int, searched: int) -> SignAssignment:
        signs = {r: bin(c & s_bits).count("1") & 1 for r, c in zip(R, combos)}
        bsigns = tuple((s_bits >> i) & 1 for i in range(d))
        return SignAssignment(t, tuple(R), tuple(basis.members), bsigns, signs, total, searched)

    if t % 2 == 0 or not R:
        return build(0, sum(weights), 1)
    searched = 0
    if d <= ENUMERATION_CAP:
        chunk = 256
        for start in range(0, 1 << d, chunk):
            cands = np.arange(start, min(start + chunk, 1 << d), dtype=np.int64)
            totals = _signed_totals(weights, combos, cands)
            for s_bits, total in zip(cands, totals):
                searched += 1
                if total >= 0:
                    return build(int(s_bits), total, searched)
        raise ArithmeticError("no nonnegative sign assignment exists; the spectrum is inconsistent")
    gen = as_generator(rng)
    best = None
    for _ in range(RANDOM_SIGN_TRIES):
        s_bits = int.from_bytes(gen.bytes((d + 7) // 8), "little") & ((1 << d) - 1)
        total = _slow_total(weights, combos, s_bits)
        searched += 1
        if best is None or total > best[1]:
            best = (s_bits, total)
        if total >= 0:
            return build(s_bits, total, searched)
    raise ArithmeticError(f"random search over {d} basis signs found no nonnegative assignment")


def _slow_total(weights, combos, s_bits) -> int:
    return sum(w if bin(c & s_bits).count("1") % 2 == 0 else -w for w, c in zip(weights, combos))


@dataclass(frozen=True)
class AffineSubspaceV:
    """V = {v : <v, r> = s_r for r in the stored independent constraints}."""

    n: int
    constraints: tuple  # ((r, s_r), ...), r linearly independent
    offset: int
    basis: tuple        # basis of the direction space (solutions with s = 0)

    @property
    def dimension(self) -> int:
        return self.n - len(self.constraints)

    def __contains__(self, v) -> bool:
        v = int(v)
        return all(bin(v & r).count("1") % 2 == s for r, s in self.constraints)

    def enumerate(self) -> np.ndarray:
        if self.dimension > ENUMERATION_CAP:
            raise ValueError(f"refusing to enumerate 2**{self.dimension} points")
        pts = np.array([self.offset], dtype=np.int64)
        for b in self.basis:
            pts = np.concatenate([pts, pts ^ b])
        return pts

    def sample(self, count: int, rng=None) -> np.ndarray:
        gen = as_generator(rng)
        pts = np.full(count, self.offset, dtype=np.int64)
        for b in self.basis:
            pts ^= np.where(gen.integers(0, 2, size=count).astype(bool), b, 0)
        return pts


def solve_affine(n: int, constraints) -> AffineSubspaceV:
    """Offset and direction basis of {v : <v, r> = s for (r, s) in constraints}."""
    constraints = tuple((int(r), int(s) & 1) for r, s in constraints)
    # reduced row echelon form on (r | s)
    rows = [(r, s) for r, s in constraints]
    pivots: list[tuple[int, int, int]] = []  # (pivot bit, r, s)
    for r, s in rows:
        for bit, pr, ps in pivots:
            if (r >> bit) & 1:
                r ^= pr
                s ^= ps
        if r == 0:
            if s:
                raise ValueError("inconsistent affine constraints")
            continue
        bit = r.bit_length() - 1
        pivots = [(b, pr ^ r, ps ^ s) if (pr >> bit) & 1 else (b, pr, ps) for b, pr, ps in pivots]
        pivots.append((bit, r, s))
    pivot_bits = {b for b, _, _ in pivots}
    offset = 0
    for bit, _, s in pivots:
        if s:
            offset |= 1 << bit
    basis = []
    for free in range(n):
        if free in pivot_bits:
            continue
        v = 1 << free
        for bit, r, _ in pivots:
            if (r >> free) & 1:
                v |= 1 << bit
        basis.append(v)
    return AffineSubspaceV(n, constraints, offset, tuple(basis))


def bogolyubov_subspace(A: SubsetF2n, t: int, rng=None, assignment: Optional[SignAssignment] = None) -> AffineSubspaceV:
    """The affine subspace cut out by the large spectrum with the chosen signs."""
    if A.size == 0:
        raise ValueError("A must be nonempty")
    if assignment is None:
        assignment = sign_assignment(A, t, rng)
    cons = [(r, s) for r, s in zip(assignment.basis, assignment.basis_signs)]
    return solve_affine(A.n, cons)


# --- convolution counts and the probability bound ----------------------------


def convolution_counts(A: SubsetF2n, t: int, spectrum: Optional[IntSpectrum] = None) -> list:
    """N_t(v) = #{(a_1..a_t) in A^t : sum a_i = v} for every v, via the spectrum."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if A.n > 16 or t > 8:
        raise ValueError("convolution counts are limited to n <= 16, t <= 8")
    spec = wht(A) if spectrum is None else spectrum
    powered = np.array([int(x) ** t for x in spec.values], dtype=object)
    summed = _butterfly(powered, A.n)
    out = []
    for v, total in enumerate(summed):
        q, rem = divmod(int(total), 1 << A.n)
        if rem:
            raise ArithmeticError(f"spectral sum at v={v} is not divisible by 2^n")
        out.append(q)
    return out


def convolution_count(A: SubsetF2n, t: int, v: int, spectrum: Optional[IntSpectrum] = None) -> int:
    """N_t(v) = 2^-n sum_r S(r)^t (-1)^<r,v>."""
    if A.n > 16 or t > 8:
        raise ValueError("convolution counts are limited to n <= 16, t <= 8")
    spec = wht(A) if spectrum is None else spectrum
    rs = np.arange(1 << A.n, dtype=np.int64)
    neg = _parity(rs & int(v)).astype(bool)
    total = 0
    for val, flip in zip(spec.values, neg):
        term = int(val) ** t
        total += -term if flip else term
    q, rem = divmod(total, 1 << A.n)
    if rem:
        raise ArithmeticError("spectral sum is not divisible by 2^n")
    return q


def main_bound(alpha, t: int) -> Fraction:
    alpha = Fraction(alpha)
    c = Fraction(1, 2 ** (t - 2))
    return alpha**t * (1 + c) - alpha ** (t - 1) * c


def special_bound_applies(alpha, t: int) -> bool:
    """t > log2(1/alpha) + 2, decided exactly as 2^(t-2) * alpha > 1."""
    return Fraction(2) ** (t - 2) * Fraction(alpha) > 1


@dataclass(frozen=True)
class BogolyubovReport:
    n: int
    t: int
    alpha: Fraction
    dimension: int
    main_bound: Fraction
    special_bound: Optional[Fraction]
    min_probability: Fraction
    points_checked: int
    coverage: Fraction
    failures: tuple

    @property
    def passed(self) -> bool:
        return not self.failures


def bogolyubov_verify(A: SubsetF2n, t: int, rng=None, V: Optional[AffineSubspaceV] = None) -> BogolyubovReport:
    """Check Pr[a_1..a_t in A | sum = v] against the bounds for every v in V.

    Exhaustive when dim V <= 20, otherwise 2**16 uniformly sampled points.
    """
    spec = wht(A)
    if V is None:
        V = bogolyubov_subspace(A, t, rng, sign_assignment(A, t, rng, spec))
    counts = convolution_counts(A, t, spec)
    alpha = A.density
    lower = main_bound(alpha, t)
    special = (alpha / 2) ** t if special_bound_applies(alpha, t) else None
    if V.dimension <= ENUMERATION_CAP:
        pts = V.enumerate()
        coverage = Fraction(1)
    else:
        pts = V.sample(SAMPLE_POINTS, rng)
        coverage = Fraction(SAMPLE_POINTS, 1 << V.dimension)
    scale = 1 << (A.n * (t - 1))
    failures = []
    min_prob = None
    for v in pts:
        prob = Fraction(counts[int(v)], scale)
        if min_prob is None or prob < min_prob:
            min_prob = prob
        if prob < lower or (special is not None and prob < special):
            failures.append((int(v), prob))
    return BogolyubovReport(A.n, t, alpha, V.dimension, lower, special, min_prob, len(pts), coverage, tuple(failures))


@dataclass(frozen=True)
class TailBoundResult:
    lhs: int
    rhs: Fraction

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs

    def __bool__(self):
        return self.holds


def tail_bound_check(A: SubsetF2n, t: int, spectrum: Optional[IntSpectrum] = None) -> TailBoundResult:
    """sum_{r not in R, r != 0} |S(r)|^t <= (|A|/2)^(t-2) * (|A| 2^n - |A|^2).

    The right side is the small-coefficient tail bound scaled by 2^(nt);
    sum_{r != 0} S(r)^2 = |A| 2^n - |A|^2 is the Parseval remainder.
    """
    if t < 3:
        raise ValueError("t must be >= 3")
    spec = wht(A) if spectrum is None else spectrum
    in_large = np.zeros(1 << A.n, dtype=bool)
    in_large[large_spectrum(A, spec)] = True
    in_large[0] = True
    lhs = sum(abs(int(x)) ** t for x in spec.values[~in_large])
    size = A.size
    rhs = Fraction(size, 2) ** (t - 2) * (size * (1 << A.n) - size * size)
    return TailBoundResult(lhs, rhs)


def consistent_signs(n: int, signs: dict) -> bool:
    """Whether {<v, r> = s_r} is solvable, i.e. the signs respect every linear relation in R."""
    try:
        solve_affine(n, signs.items())
    except ValueError:
        return False
    return True
