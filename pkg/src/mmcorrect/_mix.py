"""Seed derivation and keyed per-entry pseudorandomness.

Everything here is a fixed public function so that reports can be reproduced
from the master seed alone.
"""
from __future__ import annotations

import hashlib
from fractions import Fraction

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _C1) & MASK64
    z = ((z ^ (z >> 27)) * _C2) & MASK64
    return z ^ (z >> 31)


def mix64_array(x: np.ndarray) -> np.ndarray:
    z = x.astype(np.uint64) + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
    return z ^ (z >> np.uint64(31))


def derive_seed(parent: int, index: int) -> int:
    """Child seed for ``index`` under ``parent`` (trial or repetition streams)."""
    return mix64((parent & MASK64) ^ mix64(index & MASK64))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(None if rng is None else int(rng) & MASK64)


def draw_seed(rng) -> int:
    """A 64-bit seed taken from ``rng`` (an int seed passes through unchanged)."""
    if isinstance(rng, (int, np.integer)):
        return int(rng) & MASK64
    return int(as_generator(rng).integers(0, MASK64, endpoint=True, dtype=np.uint64))


def digest(*chunks: bytes) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    for chunk in chunks:
        h.update(len(chunk).to_bytes(8, "little"))
        h.update(chunk)
    return h.digest()


def keyed_uniforms(key: bytes, seed: int, stream: int, count: int) -> np.ndarray:
    """``count`` uint64 words, a deterministic function of (key, seed, stream, index)."""
    lo = int.from_bytes(key[:8], "little")
    hi = int.from_bytes(key[8:16], "little")
    base = mix64(lo ^ mix64(hi ^ mix64((seed & MASK64) ^ mix64(stream))))
    idx = np.arange(count, dtype=np.uint64) * np.uint64(GOLDEN)
    return mix64_array(idx ^ np.uint64(base))


def bernoulli_mask(words: np.ndarray, prob: Fraction) -> np.ndarray:
    """True with probability ``prob`` (to within 2**-64) per word."""
    prob = Fraction(prob)
    if prob <= 0:
        return np.zeros(words.shape, dtype=bool)
    if prob >= 1:
        return np.ones(words.shape, dtype=bool)
    threshold = (prob.numerator << 64) // prob.denominator
    return words < np.uint64(threshold)
