"""Text formats for matrices and subsets of F_2^n.

Matrix file::

    ffmat v1 p=<p> n=<rows> m=<cols>
    <one line per row>

Rows over GF(2) are hex nibbles, column 4c being the most significant bit
of nibble c (trailing pad bits zero).  Rows over GF(p) are space-separated
decimal residues.

Subset file::

    f2set v1 n=<n>
    <hex bitset, element x at nibble x // 4, most significant bit first>

The bitset may be wrapped over several lines.
"""
from __future__ import annotations

import re
from pathlib import Path
from typing import Union

import numpy as np

from ..boolean_fourier import SubsetF2n
from ..ffmat import MatF2, Matrix, matrix

_MAT_HEADER = re.compile(r"^ffmat v1 p=(\d+) n=(\d+) m=(\d+)$")
_SET_HEADER = re.compile(r"^f2set v1 n=(\d+)$")
_HEX = re.compile(r"^[0-9a-fA-F]*$")
_WRAP = 64


class ParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _bits_to_hex(bits: np.ndarray) -> str:
    pad = (-bits.size) % 4
    padded = np.concatenate([bits.astype(np.uint8), np.zeros(pad, dtype=np.uint8)])
    nibbles = padded.reshape(-1, 4) @ np.array([8, 4, 2, 1])
    return "".join("0123456789abcdef"[v] for v in nibbles)


def _hex_to_bits(text: str, count: int, line: int) -> np.ndarray:
    if not _HEX.match(text):
        raise ParseError(f"invalid hex digits in {text!r}", line)
    digits = (count + 3) // 4
    if len(text) != digits:
        raise ParseError(f"expected {digits} hex digits, got {len(text)}", line)
    vals = np.array([int(c, 16) for c in text], dtype=np.uint8)
    bits = ((vals[:, None] >> np.array([3, 2, 1, 0])) & 1).reshape(-1)
    if bits[count:].any():
        raise ParseError("nonzero padding bits", line)
    return bits[:count]


def serialize_matrix(M: Matrix) -> str:
    lines = [f"ffmat v1 p={M.field.p} n={M.n} m={M.m}"]
    arr = M.to_array()
    if isinstance(M, MatF2):
        lines.extend(_bits_to_hex(row) for row in arr)
    else:
        lines.extend(" ".join(str(int(v)) for v in row) for row in arr)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> Matrix:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    head = _MAT_HEADER.match(lines[0].strip())
    if not head:
        raise ParseError(f"bad header {lines[0]!r}, expected 'ffmat v1 p=<p> n=<rows> m=<cols>'", 1)
    p, n, m = (int(g) for g in head.groups())
    body = lines[1:]
    while body and not body[-1].strip():
        body.pop()
    if len(body) < n:
        raise ParseError(f"missing row {len(body)} of {n} (file ends after line {len(lines)})", len(body) + 2)
    if len(body) > n:
        raise ParseError(f"unexpected extra row after {n} rows", n + 2)
    rows = []
    for i, raw in enumerate(body):
        line_no = i + 2
        raw = raw.strip()
        if p == 2:
            rows.append(_hex_to_bits(raw, m, line_no))
            continue
        parts = raw.split()
        if len(parts) != m:
            raise ParseError(f"row {i} has {len(parts)} entries, expected {m}", line_no)
        try:
            vals = [int(x) for x in parts]
        except ValueError:
            raise ParseError(f"row {i} has a non-integer entry", line_no) from None
        if any(not 0 <= v < p for v in vals):
            raise ParseError(f"row {i} has an entry outside [0, {p})", line_no)
        rows.append(vals)
    try:
        return matrix(np.array(rows, dtype=np.int64).reshape(n, m), p)
    except ValueError as exc:
        raise ParseError(str(exc), 1) from None


def write_matrix(path: Union[str, Path], M: Matrix) -> None:
    Path(path).write_text(serialize_matrix(M), encoding="utf-8")


def read_matrix(path: Union[str, Path]) -> Matrix:
    return parse_matrix(Path(path).read_text(encoding="utf-8"))


def serialize_subset(A: SubsetF2n) -> str:
    digits = _bits_to_hex(A.members)
    body = [digits[i : i + _WRAP] for i in range(0, len(digits), _WRAP)]
    return "\n".join([f"f2set v1 n={A.n}"] + body) + "\n"


def parse_subset(text: str) -> SubsetF2n:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", 1)
    head = _SET_HEADER.match(lines[0].strip())
    if not head:
        raise ParseError(f"bad header {lines[0]!r}, expected 'f2set v1 n=<n>'", 1)
    n = int(head.group(1))
    digits = "".join(line.strip() for line in lines[1:])
    bits = _hex_to_bits(digits, 1 << n, len(lines))
    return SubsetF2n(n, bits.astype(bool))


def read_subset(path: Union[str, Path]) -> SubsetF2n:
    return parse_subset(Path(path).read_text(encoding="utf-8"))


def write_subset(path: Union[str, Path], A: SubsetF2n) -> None:
    Path(path).write_text(serialize_subset(A), encoding="utf-8")
