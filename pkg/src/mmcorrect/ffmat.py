"""Dense matrices over GF(2) and prime fields GF(p), p < 2**31.

GF(2) matrices are bit-packed: row ``i`` is a run of 64-bit words and column
``j`` lives in word ``j // 64`` at bit ``j % 64``.  Bits past the last column
are always zero, so equality is plain word comparison.

Prime-field matrices hold int64 residues in ``[0, p)``.

All matrix values are immutable; every operation returns a fresh matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from ._mix import as_generator

WORD_BITS = 64
MAX_PRIME = 2**31
M4RI_THRESHOLD = 256
_ALL_ONES = np.uint64(0xFFFFFFFFFFFFFFFF)
# cap on the temporary (rows x inner x words) block of the row-accumulation kernel
_ACC_BLOCK = 1 << 22


class ShapeError(ValueError):
    pass


class FieldMismatchError(ValueError):
    pass


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    for d in range(3, math.isqrt(p) + 1, 2):
        if p % d == 0:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    p: int

    def __post_init__(self):
        p = self.p
        if isinstance(p, bool) or not isinstance(p, (int, np.integer)):
            raise TypeError(f"field characteristic must be an int, got {p!r}")
        object.__setattr__(self, "p", int(p))
        if not is_prime(self.p):
            raise ValueError(f"field characteristic {self.p} is not prime")
        if self.p >= MAX_PRIME:
            raise ValueError(f"prime fields are limited to p < 2**31, got {self.p}")

    def __repr__(self):
        return f"GF({self.p})"


GF2 = FieldSpec(2)


def as_field(field: Union[FieldSpec, int]) -> FieldSpec:
    return field if isinstance(field, FieldSpec) else FieldSpec(field)


def n_words(m: int) -> int:
    return (m + WORD_BITS - 1) // WORD_BITS


def _tail_mask(m: int) -> np.uint64:
    rem = m % WORD_BITS
    return _ALL_ONES if rem == 0 else np.uint64((1 << rem) - 1)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """(n, m) 0/1 array -> (n, n_words(m)) uint64 words."""
    bits = np.asarray(bits)
    n, m = bits.shape
    packed = np.packbits(bits.astype(bool), axis=1, bitorder="little")
    buf = np.zeros((n, n_words(m) * 8), dtype=np.uint8)
    buf[:, : packed.shape[1]] = packed
    return buf.view("<u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, m: int) -> np.ndarray:
    """(n, w) uint64 words -> (n, m) uint8 bits."""
    n = words.shape[0]
    raw = np.ascontiguousarray(words, dtype="<u8").view(np.uint8).reshape(n, -1)
    return np.unpackbits(raw, axis=1, count=m, bitorder="little")


def _check_dims(n: int, m: int) -> None:
    if n < 1 or m < 1:
        raise ShapeError(f"matrix dimensions must be >= 1, got {n}x{m}")


class MatF2:
    """Bit-packed matrix over GF(2)."""

    __slots__ = ("n", "m", "words")
    field = GF2

    def __init__(self, n: int, m: int, words: np.ndarray):
        _check_dims(n, m)
        words = np.array(words, dtype=np.uint64)
        if words.shape != (n, n_words(m)):
            raise ShapeError(f"expected word array of shape {(n, n_words(m))}, got {words.shape}")
        words[:, -1] &= _tail_mask(m)
        words.flags.writeable = False
        self.n = n
        self.m = m
        self.words = words

    @classmethod
    def from_bits(cls, bits) -> "MatF2":
        bits = np.asarray(bits)
        if bits.ndim != 2:
            raise ShapeError("expected a 2-D array")
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("GF(2) entries must be 0 or 1")
        n, m = bits.shape
        return cls(n, m, pack_bits(bits))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.m)

    def to_array(self) -> np.ndarray:
        return unpack_bits(self.words, self.m)

    def __getitem__(self, ij) -> int:
        i, j = ij
        return int((int(self.words[i, j // WORD_BITS]) >> (j % WORD_BITS)) & 1)

    def tobytes(self) -> bytes:
        return self.words.astype("<u8").tobytes()

    def __eq__(self, other):
        if not isinstance(other, MatF2):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.words, other.words)

    __hash__ = None

    def __repr__(self):
        return f"MatF2({self.n}x{self.m})"


class MatFp:
    """Matrix over a prime field GF(p) with p > 2, stored as int64 residues."""

    __slots__ = ("field", "data")

    def __init__(self, data, field: Union[FieldSpec, int]):
        field = as_field(field)
        if field.p == 2:
            raise FieldMismatchError("use MatF2 for GF(2)")
        arr = np.array(data, dtype=np.int64)
        if arr.ndim != 2:
            raise ShapeError("expected a 2-D array")
        _check_dims(*arr.shape)
        if arr.size and (arr.min() < 0 or arr.max() >= field.p):
            raise ValueError(f"entries must be residues in [0, {field.p})")
        arr.flags.writeable = False
        self.field = field
        self.data = arr

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def m(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def to_array(self) -> np.ndarray:
        return self.data.copy()

    def __getitem__(self, ij) -> int:
        return int(self.data[ij])

    def tobytes(self) -> bytes:
        return self.data.astype("<i8").tobytes()

    def __eq__(self, other):
        if not isinstance(other, MatFp):
            return NotImplemented
        return self.field == other.field and np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self):
        return f"MatFp(GF({self.field.p}), {self.n}x{self.m})"


Matrix = Union[MatF2, MatFp]


def matrix(values, field: Union[FieldSpec, int] = GF2) -> Matrix:
    """Build a matrix from nested lists or an array; entries are reduced mod p."""
    field = as_field(field)
    arr = np.asarray(values, dtype=np.int64)
    if arr.ndim != 2:
        raise ShapeError("expected a 2-D array")
    arr = arr % field.p
    if field.p == 2:
        return MatF2.from_bits(arr)
    return MatFp(arr, field)


def zeros(n: int, m: int, field: Union[FieldSpec, int] = GF2) -> Matrix:
    field = as_field(field)
    _check_dims(n, m)
    if field.p == 2:
        return MatF2(n, m, np.zeros((n, n_words(m)), dtype=np.uint64))
    return MatFp(np.zeros((n, m), dtype=np.int64), field)


def identity(n: int, field: Union[FieldSpec, int] = GF2) -> Matrix:
    return matrix(np.eye(n, dtype=np.int64), field)


def ones(n: int, m: int, field: Union[FieldSpec, int] = GF2) -> Matrix:
    return matrix(np.ones((n, m), dtype=np.int64), field)


def _same_field(A: Matrix, B: Matrix) -> None:
    if A.field != B.field or type(A) is not type(B):
        raise FieldMismatchError(f"field mismatch: {A.field} vs {B.field}")


def _same_shape(A: Matrix, B: Matrix) -> None:
    _same_field(A, B)
    if A.shape != B.shape:
        raise ShapeError(f"shape mismatch: {A.shape} vs {B.shape}")


# --- multiplication -------------------------------------------------------


def _f2_mul_rows(a_bits: np.ndarray, b_words: np.ndarray) -> np.ndarray:
    """For every set bit A[i,k], XOR packed row k of B into output row i."""
    n, inner = a_bits.shape
    w = b_words.shape[1]
    masks = np.where(a_bits.astype(bool), _ALL_ONES, np.uint64(0))
    out = np.empty((n, w), dtype=np.uint64)
    step = max(1, _ACC_BLOCK // max(1, inner * w))
    for start in range(0, n, step):
        block = masks[start : start + step, :, None] & b_words[None, :, :]
        out[start : start + step] = np.bitwise_xor.reduce(block, axis=1)
    return out


def _f2_mul_m4r(a_bits: np.ndarray, b_words: np.ndarray, group: int = 8) -> np.ndarray:
    """Method of four Russians: XOR tables over ``group`` rows of B at a time."""
    n, inner = a_bits.shape
    w = b_words.shape[1]
    out = np.zeros((n, w), dtype=np.uint64)
    for start in range(0, inner, group):
        rows = b_words[start : start + group]
        g = rows.shape[0]
        table = np.zeros((1 << g, w), dtype=np.uint64)
        for bit in range(g):
            size = 1 << bit
            table[size : 2 * size] = table[:size] ^ rows[bit]
        weights = (1 << np.arange(g, dtype=np.int64))
        idx = a_bits[:, start : start + g].astype(np.int64) @ weights
        out ^= table[idx]
    return out


def _fp_mul(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    inner = a.shape[1]
    top = (p - 1) ** 2
    if inner * top < 2**53:
        # every partial sum of nonnegative terms stays below 2**53, so float64 is exact
        prod = a.astype(np.float64) @ b.astype(np.float64)
        return prod.astype(np.int64) % p
    chunk = max(1, (2**63 - 1) // top)
    acc = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for s in range(0, inner, chunk):
        acc = (acc + (a[:, s : s + chunk] @ b[s : s + chunk]) % p) % p
    return acc


def mat_mul(A: Matrix, B: Matrix) -> Matrix:
    """Exact product ``A @ B`` over the common field."""
    _same_field(A, B)
    if A.m != B.n:
        raise ShapeError(f"cannot multiply {A.shape} by {B.shape}")
    if isinstance(A, MatF2):
        a_bits = A.to_array()
        if max(A.n, A.m, B.m) >= M4RI_THRESHOLD:
            words = _f2_mul_m4r(a_bits, B.words)
        else:
            words = _f2_mul_rows(a_bits, B.words)
        return MatF2(A.n, B.m, words)
    return MatFp(_fp_mul(A.data, B.data, A.field.p), A.field)


def mat_add(A: Matrix, B: Matrix) -> Matrix:
    _same_shape(A, B)
    if isinstance(A, MatF2):
        return MatF2(A.n, A.m, A.words ^ B.words)
    return MatFp((A.data + B.data) % A.field.p, A.field)


def mat_sub(A: Matrix, B: Matrix) -> Matrix:
    _same_shape(A, B)
    if isinstance(A, MatF2):
        return MatF2(A.n, A.m, A.words ^ B.words)
    return MatFp((A.data - B.data) % A.field.p, A.field)


def mat_sum(mats) -> Matrix:
    mats = list(mats)
    if not mats:
        raise ValueError("empty sum")
    out = mats[0]
    for M in mats[1:]:
        out = mat_add(out, M)
    return out


def agreement(A: Matrix, B: Matrix) -> Fraction:
    """Fraction of entries on which ``A`` and ``B`` coincide, as an exact rational."""
    _same_shape(A, B)
    total = A.n * A.m
    if isinstance(A, MatF2):
        # padding bits are zero in both operands, so they never count as differences
        differ = int(np.bitwise_count(A.words ^ B.words).sum())
        return Fraction(total - differ, total)
    return Fraction(int(np.count_nonzero(A.data == B.data)), total)


# --- shifts ---------------------------------------------------------------


@dataclass(frozen=True)
class ShiftPair:
    """Rotate rows down by ``pi`` and columns right by ``sigma``."""

    pi: int
    sigma: int

    def __post_init__(self):
        if self.pi < 0 or self.sigma < 0:
            raise ValueError(f"shift components must be nonnegative: {self}")

    def inverse(self, n: int, m: int) -> "ShiftPair":
        return ShiftPair((n - self.pi) % n, (m - self.sigma) % m)


def cyclic_shift(A: Matrix, shift) -> Matrix:
    """``out[i, j] = A[(i - pi) mod n, (j - sigma) mod m]``."""
    if not isinstance(shift, ShiftPair):
        shift = ShiftPair(*shift)
    if shift.pi >= A.n or shift.sigma >= A.m:
        raise ValueError(f"shift {shift} out of range for a {A.n}x{A.m} matrix")
    if isinstance(A, MatF2):
        words = np.roll(A.words, shift.pi, axis=0)
        if shift.sigma:
            bits = np.roll(unpack_bits(words, A.m), shift.sigma, axis=1)
            words = pack_bits(bits)
        return MatF2(A.n, A.m, words)
    return MatFp(np.roll(A.data, (shift.pi, shift.sigma), axis=(0, 1)), A.field)


# --- sampling -------------------------------------------------------------


def sample_uniform(n: int, m: int, field: Union[FieldSpec, int] = GF2, rng=None) -> Matrix:
    """Matrix with independent uniform entries drawn from ``rng``."""
    field = as_field(field)
    _check_dims(n, m)
    gen = as_generator(rng)
    if field.p == 2:
        words = gen.integers(0, _ALL_ONES, size=(n, n_words(m)), dtype=np.uint64, endpoint=True)
        return MatF2(n, m, words)
    return MatFp(gen.integers(0, field.p, size=(n, m), dtype=np.int64), field)


@dataclass(frozen=True)
class LowRankMat:
    """An n x m matrix of rank at most k kept as ``base @ coeffs``.

    ``base`` is n x k (the first k columns), ``coeffs`` is k x m with the
    identity in its leftmost k x k block.  Both are ``None`` when k == 0.
    """

    field: FieldSpec
    n: int
    m: int
    k: int
    base: Optional[Matrix]
    coeffs: Optional[Matrix]

    def dense(self) -> Matrix:
        if self.k == 0:
            return zeros(self.n, self.m, self.field)
        return mat_mul(self.base, self.coeffs)


def sample_low_rank(n: int, m: int, k: int, field: Union[FieldSpec, int] = GF2, rng=None) -> LowRankMat:
    """First k columns uniform, the remaining m - k uniform combinations of them."""
    field = as_field(field)
    _check_dims(n, m)
    if not 0 <= k <= m:
        raise ValueError(f"rank parameter k={k} must lie in [0, {m}]")
    if k == 0:
        return LowRankMat(field, n, m, 0, None, None)
    gen = as_generator(rng)
    base = sample_uniform(n, k, field, gen)
    coeff_arr = np.zeros((k, m), dtype=np.int64)
    coeff_arr[:, :k] = np.eye(k, dtype=np.int64)
    if m > k:
        coeff_arr[:, k:] = sample_uniform(k, m - k, field, gen).to_array()
    return LowRankMat(field, n, m, k, base, matrix(coeff_arr, field))


def lowrank_mul(L: LowRankMat, D: Matrix, side: str = "left") -> Matrix:
    """``L @ D`` (side='left') or ``D @ L`` (side='right') through the factors."""
    if L.field != D.field:
        raise FieldMismatchError(f"field mismatch: {L.field} vs {D.field}")
    if side == "left":
        if L.m != D.n:
            raise ShapeError(f"cannot multiply {(L.n, L.m)} by {D.shape}")
        if L.k == 0:
            return zeros(L.n, D.m, L.field)
        return mat_mul(L.base, mat_mul(L.coeffs, D))
    if side == "right":
        if D.m != L.n:
            raise ShapeError(f"cannot multiply {D.shape} by {(L.n, L.m)}")
        if L.k == 0:
            return zeros(D.n, L.m, L.field)
        return mat_mul(mat_mul(D, L.base), L.coeffs)
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def lowrank_product(L1: LowRankMat, L2: LowRankMat) -> Matrix:
    """``L1 @ L2`` without densifying either factor."""
    if L1.field != L2.field:
        raise FieldMismatchError(f"field mismatch: {L1.field} vs {L2.field}")
    if L1.m != L2.n:
        raise ShapeError(f"cannot multiply {(L1.n, L1.m)} by {(L2.n, L2.m)}")
    if L1.k == 0 or L2.k == 0:
        return zeros(L1.n, L2.m, L1.field)
    return mat_mul(L1.base, lowrank_mul(L2, L1.coeffs, "right"))


# --- rank -----------------------------------------------------------------


def f2_rank_rows(rows) -> int:
    """Rank of GF(2) vectors given as Python ints."""
    basis: dict[int, int] = {}
    for v in rows:
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                basis[top] = v
                break
            v ^= basis[top]
    return len(basis)


def rank(A: Matrix) -> int:
    """Rank over the matrix's field by Gaussian elimination."""
    if isinstance(A, MatF2):
        rows = [int.from_bytes(A.words[i].astype("<u8").tobytes(), "little") for i in range(A.n)]
        return f2_rank_rows(rows)
    p = A.field.p
    work = A.data.copy()
    n, m = work.shape
    r = 0
    for col in range(m):
        nz = np.nonzero(work[r:, col])[0]
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            work[[r, piv]] = work[[piv, r]]
        inv = pow(int(work[r, col]), -1, p)
        work[r] = (work[r] * inv) % p
        below = work[r + 1 :, col].copy()
        if below.any():
            work[r + 1 :] = (work[r + 1 :] - np.outer(below, work[r]) % p) % p
        r += 1
        if r == n:
            break
    return r


def inner_f2(W: MatF2, A: MatF2) -> int:
    """Frobenius inner product sum_ij W_ij A_ij over GF(2)."""
    _same_shape(W, A)
    return int(np.bitwise_count(W.words & A.words).sum()) & 1
