from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sympy import GF
from sympy.polys.matrices import DomainMatrix

from mmcorrect.ffmat import (
    GF2,
    M4RI_THRESHOLD,
    FieldMismatchError,
    FieldSpec,
    MatF2,
    ShapeError,
    ShiftPair,
    agreement,
    cyclic_shift,
    identity,
    inner_f2,
    lowrank_mul,
    lowrank_product,
    mat_add,
    mat_mul,
    mat_sub,
    mat_sum,
    matrix,
    ones,
    rank,
    sample_low_rank,
    sample_uniform,
    zeros,
)


def schoolbook(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """Reference product with Python ints, no overflow possible."""
    n, inner = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=object)
    ao, bo = a.astype(object), b.astype(object)
    for i in range(n):
        for j in range(m):
            out[i, j] = sum(ao[i, x] * bo[x, j] for x in range(inner)) % p
    return out.astype(np.int64)


def sympy_rank(arr: np.ndarray, p: int) -> int:
    dom = GF(p)
    rows = [[dom(int(v)) for v in row] for row in arr]
    return DomainMatrix(rows, arr.shape, dom).rank()


@pytest.mark.parametrize("n,inner,m", [(1, 1, 1), (5, 7, 3), (64, 64, 64), (70, 65, 129)])
def test_f2_mul_matches_schoolbook(n, inner, m):
    rng = np.random.default_rng(n * 1000 + m)
    A = sample_uniform(n, inner, 2, rng)
    B = sample_uniform(inner, m, 2, rng)
    assert np.array_equal(mat_mul(A, B).to_array(), schoolbook(A.to_array(), B.to_array(), 2))


def test_f2_four_russians_path_matches_schoolbook():
    n = M4RI_THRESHOLD + 44
    rng = np.random.default_rng(3)
    A = sample_uniform(n, n, 2, rng)
    B = sample_uniform(n, n, 2, rng)
    expected = (A.to_array().astype(np.int64) @ B.to_array().astype(np.int64)) % 2
    assert np.array_equal(mat_mul(A, B).to_array(), expected)


@pytest.mark.parametrize("p", [3, 5, 7, 65521, 2**31 - 1])
def test_fp_mul_matches_schoolbook(p):
    rng = np.random.default_rng(p % 1000)
    A = sample_uniform(9, 13, p, rng)
    B = sample_uniform(13, 6, p, rng)
    assert np.array_equal(mat_mul(A, B).to_array(), schoolbook(A.to_array(), B.to_array(), p))


def test_large_prime_wide_inner_dimension():
    # inner * (p-1)^2 far exceeds 2^53, so the exact integer path must be used
    p = 2**31 - 1
    rng = np.random.default_rng(8)
    A = sample_uniform(4, 300, p, rng)
    B = sample_uniform(300, 4, p, rng)
    assert np.array_equal(mat_mul(A, B).to_array(), schoolbook(A.to_array(), B.to_array(), p))


def test_canonical_padding_and_equality():
    bits = np.ones((3, 70), dtype=np.uint8)
    A = MatF2.from_bits(bits)
    assert int(A.words[0, 1]) == (1 << 6) - 1
    dirty = A.words.copy()
    dirty[:, 1] |= np.uint64(1 << 40)
    assert MatF2(3, 70, dirty) == A
    assert mat_add(A, A) == zeros(3, 70)


def test_words_are_read_only():
    A = sample_uniform(4, 4, 2, 0)
    with pytest.raises(ValueError):
        A.words[0, 0] = 1


def test_field_validation():
    with pytest.raises(ValueError):
        FieldSpec(4)
    with pytest.raises(ValueError):
        FieldSpec(2**31 + 11)
    with pytest.raises(FieldMismatchError):
        mat_mul(identity(3, 2), identity(3, 5))
    with pytest.raises(ShapeError):
        mat_mul(zeros(2, 3), zeros(2, 3))


def test_matrix_reduces_mod_p():
    M = matrix([[7, -1], [12, 3]], 5)
    assert M.to_array().tolist() == [[2, 4], [2, 3]]


def test_add_sub_sum():
    rng = np.random.default_rng(1)
    for p in (2, 7):
        A, B, C = (sample_uniform(5, 6, p, rng) for _ in range(3))
        assert mat_sub(mat_add(A, B), B) == A
        expected = (A.to_array() + B.to_array() + C.to_array()) % p
        assert np.array_equal(mat_sum([A, B, C]).to_array(), expected)


def test_agreement_counts_matching_entries():
    A = zeros(4, 4)
    B = MatF2.from_bits(np.eye(4, dtype=np.uint8))
    assert agreement(A, B) == Fraction(12, 16)
    assert agreement(ones(3, 3, 7), ones(3, 3, 7)) == 1


def test_cyclic_shift_definition():
    rng = np.random.default_rng(2)
    for p in (2, 3):
        A = sample_uniform(5, 7, p, rng)
        S = cyclic_shift(A, (2, 3)).to_array()
        a = A.to_array()
        for i in range(5):
            for j in range(7):
                assert S[i, j] == a[(i - 2) % 5, (j - 3) % 7]


def test_cyclic_shift_inverse_and_range():
    A = sample_uniform(6, 6, 2, 4)
    s = ShiftPair(4, 1)
    assert cyclic_shift(cyclic_shift(A, s), s.inverse(6, 6)) == A
    with pytest.raises(ValueError):
        cyclic_shift(A, (6, 0))


def test_shift_proposition_exhaustive_small():
    rng = np.random.default_rng(5)
    n = 5
    for _ in range(5):
        A = sample_uniform(n, n, 2, rng)
        B = sample_uniform(n, n, 2, rng)
        C = mat_mul(A, B)
        for pi in range(n):
            for sigma in range(n):
                lhs = mat_mul(cyclic_shift(A, (pi, 0)), cyclic_shift(B, (0, sigma)))
                assert lhs == cyclic_shift(C, (pi, sigma))


@pytest.mark.parametrize("p", [2, 5])
def test_low_rank_factors(p):
    rng = np.random.default_rng(p)
    L = sample_low_rank(12, 10, 4, p, rng)
    assert rank(L.dense()) <= 4
    coeffs = L.coeffs.to_array()
    assert np.array_equal(coeffs[:, :4], np.eye(4, dtype=np.int64))
    D = sample_uniform(10, 7, p, rng)
    E = sample_uniform(3, 12, p, rng)
    assert lowrank_mul(L, D, "left") == mat_mul(L.dense(), D)
    assert lowrank_mul(L, E, "right") == mat_mul(E, L.dense())
    L2 = sample_low_rank(10, 9, 3, p, rng)
    assert lowrank_product(L, L2) == mat_mul(L.dense(), L2.dense())


def test_low_rank_zero_and_bounds():
    L = sample_low_rank(4, 4, 0, 2, 0)
    assert L.base is None and L.dense() == zeros(4, 4)
    assert lowrank_mul(L, identity(4), "left") == zeros(4, 4)
    with pytest.raises(ValueError):
        sample_low_rank(4, 4, 5, 2, 0)
    with pytest.raises(ValueError):
        lowrank_mul(sample_low_rank(4, 4, 2, 2, 0), identity(4), "middle")


def test_full_rank_low_rank_mask_is_usually_full():
    rng = np.random.default_rng(9)
    ranks = [rank(sample_low_rank(16, 16, 16, 2, rng).dense()) for _ in range(20)]
    assert max(ranks) == 16


@pytest.mark.parametrize("p", [2, 3, 7, 101])
def test_rank_matches_sympy(p):
    rng = np.random.default_rng(p + 11)
    for shape in [(6, 6), (5, 9), (9, 4)]:
        A = sample_uniform(*shape, p, rng)
        assert rank(A) == sympy_rank(A.to_array(), p)
    # a deliberately rank-deficient matrix
    L = sample_low_rank(8, 8, 3, p, rng)
    assert rank(L.dense()) == sympy_rank(L.dense().to_array(), p)


def test_inner_f2():
    W = MatF2.from_bits(np.array([[1, 0], [1, 1]]))
    A = MatF2.from_bits(np.array([[1, 1], [0, 1]]))
    assert inner_f2(W, A) == 0
    assert inner_f2(W, identity(2)) == 0
    assert inner_f2(identity(2), A) == 0
    assert inner_f2(W, MatF2.from_bits(np.array([[1, 0], [0, 0]]))) == 1


def test_uniform_sampling_chi_square():
    # 2x2 matrices over GF(2): 16 outcomes, 8000 draws
    rng = np.random.default_rng(12)
    counts = np.zeros(16, dtype=np.int64)
    for _ in range(8000):
        bits = sample_uniform(2, 2, 2, rng).to_array().reshape(-1)
        counts[int(bits @ np.array([1, 2, 4, 8]))] += 1
    chi2 = float(((counts - 500) ** 2 / 500).sum())
    # 99.9th percentile of chi-square with 15 degrees of freedom is 37.7
    assert chi2 < 37.7


f2_shapes = st.tuples(st.integers(1, 80), st.integers(1, 80), st.integers(1, 80))


@settings(max_examples=40, deadline=None)
@given(f2_shapes, st.integers(0, 2**32 - 1))
def test_f2_product_properties(shape, seed):
    n, inner, m = shape
    rng = np.random.default_rng(seed)
    A = sample_uniform(n, inner, 2, rng)
    B = sample_uniform(inner, m, 2, rng)
    B2 = sample_uniform(inner, m, 2, rng)
    # distributivity and identity
    assert mat_mul(A, mat_add(B, B2)) == mat_add(mat_mul(A, B), mat_mul(A, B2))
    assert mat_mul(identity(n), A) == A
    assert mat_mul(A, B).to_array().tolist() == ((A.to_array().astype(int) @ B.to_array().astype(int)) % 2).tolist()


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([3, 5, 7, 13, 2**31 - 1]), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_fp_associativity(p, n, seed):
    rng = np.random.default_rng(seed)
    A, B, C = (sample_uniform(n, n, p, rng) for _ in range(3))
    assert mat_mul(mat_mul(A, B), C) == mat_mul(A, mat_mul(B, C))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**32 - 1))
def test_shift_is_a_permutation(n, m, seed):
    rng = np.random.default_rng(seed)
    A = sample_uniform(n, m, 2, rng)
    s = ShiftPair(int(rng.integers(0, n)), int(rng.integers(0, m)))
    S = cyclic_shift(A, s)
    assert np.sort(S.to_array(), axis=None).tolist() == np.sort(A.to_array(), axis=None).tolist()
    assert cyclic_shift(S, s.inverse(n, m)) == A


def test_gf2_constant():
    assert GF2.p == 2
    assert repr(GF2) == "GF(2)"
