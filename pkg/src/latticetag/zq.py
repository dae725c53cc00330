"""Exact arithmetic over Z_q: vectors, matrices, permutations, sampling.

Residues are kept reduced to ``0..q-1`` in read-only ``int64`` arrays.
Dot products accumulate in 64 bits before a single reduction, which is
exact for q < 2**16 and m <= 2**20.
"""

from __future__ import annotations

import hashlib
import math
from typing import Iterable

import numpy as np

from . import metering
from .errors import DimensionMismatch

MAX_Q = 1 << 16


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.int64)
    arr.setflags(write=False)
    return arr


class ZqVector:
    """Immutable vector of residues modulo ``q``."""

    __slots__ = ("elems", "q")

    def __init__(self, elems: Iterable[int] | np.ndarray, q: int):
        arr = np.array(elems, dtype=np.int64).reshape(-1)
        if not 2 <= q <= MAX_Q:
            raise DimensionMismatch(f"modulus {q} outside 2..{MAX_Q}")
        if arr.size and (arr.min() < 0 or arr.max() >= q):
            raise DimensionMismatch(f"residues must lie in 0..{q - 1}")
        self.elems = _frozen(arr)
        self.q = int(q)

    @classmethod
    def _trusted(cls, arr: np.ndarray, q: int) -> "ZqVector":
        # skips range validation; callers guarantee 0 <= arr < q
        obj = cls.__new__(cls)
        obj.elems = _frozen(arr)
        obj.q = q
        return obj

    @classmethod
    def reduce(cls, values: Iterable[int] | np.ndarray, q: int) -> "ZqVector":
        """Build a vector from arbitrary integers, reducing mod q."""
        return cls._trusted(np.mod(np.asarray(values, dtype=np.int64), q), q)

    @classmethod
    def zeros(cls, length: int, q: int) -> "ZqVector":
        return cls._trusted(np.zeros(length, dtype=np.int64), q)

    def __len__(self) -> int:
        return int(self.elems.size)

    def __iter__(self):
        return (int(e) for e in self.elems)

    def __getitem__(self, i):
        return int(self.elems[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ZqVector):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.elems, other.elems)

    def __hash__(self) -> int:
        return hash((self.q, self.elems.tobytes()))

    def __repr__(self) -> str:
        body = self.tolist() if len(self) <= 12 else f"<{len(self)} elems>"
        return f"ZqVector({body}, q={self.q})"

    def tolist(self) -> list[int]:
        return [int(e) for e in self.elems]

    def is_zero(self) -> bool:
        return not self.elems.any()

    def with_element(self, index: int, value: int) -> "ZqVector":
        """Copy with one element replaced (used by tamper scripts)."""
        arr = self.elems.copy()
        arr[index] = value % self.q
        return ZqVector._trusted(arr, self.q)


class ZqMatrix:
    """Immutable dense ``rows x cols`` matrix over Z_q."""

    __slots__ = ("elems", "q")

    def __init__(self, elems, q: int):
        arr = np.array(elems, dtype=np.int64)
        if arr.ndim != 2:
            raise DimensionMismatch("matrix data must be two-dimensional")
        if arr.size and (arr.min() < 0 or arr.max() >= q):
            raise DimensionMismatch(f"residues must lie in 0..{q - 1}")
        self.elems = _frozen(arr)
        self.q = int(q)

    @classmethod
    def _trusted(cls, arr: np.ndarray, q: int) -> "ZqMatrix":
        obj = cls.__new__(cls)
        obj.elems = _frozen(arr)
        obj.q = q
        return obj

    @property
    def rows(self) -> int:
        return int(self.elems.shape[0])

    @property
    def cols(self) -> int:
        return int(self.elems.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ZqMatrix):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.elems, other.elems)

    def __repr__(self) -> str:
        return f"ZqMatrix({self.rows}x{self.cols}, q={self.q})"


class Permutation:
    """Bijection on ``0..m-1``; position ``i`` is sent to ``map[i]``."""

    __slots__ = ("map",)

    def __init__(self, mapping: Iterable[int] | np.ndarray):
        arr = np.array(mapping, dtype=np.int64).reshape(-1)
        if not np.array_equal(np.sort(arr), np.arange(arr.size)):
            raise DimensionMismatch("permutation map is not a bijection")
        self.map = _frozen(arr)

    @classmethod
    def identity(cls, m: int) -> "Permutation":
        return cls(np.arange(m))

    @property
    def size(self) -> int:
        return int(self.map.size)

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Permutation):
            return NotImplemented
        return np.array_equal(self.map, other.map)

    def __repr__(self) -> str:
        body = self.map.tolist() if self.size <= 12 else f"<{self.size}>"
        return f"Permutation({body})"

    def matrix(self) -> np.ndarray:
        """Dense binary matrix P with P @ v == perm_apply(self, v)."""
        mat = np.zeros((self.size, self.size), dtype=np.int64)
        mat[self.map, np.arange(self.size)] = 1
        return mat


def _check_pair(a: ZqVector, b: ZqVector) -> None:
    if a.q != b.q:
        raise DimensionMismatch(f"moduli differ: {a.q} vs {b.q}")
    if len(a) != len(b):
        raise DimensionMismatch(f"lengths differ: {len(a)} vs {len(b)}")


def vec_add(a: ZqVector, b: ZqVector) -> ZqVector:
    _check_pair(a, b)
    metering.charge(len(a))
    return ZqVector._trusted((a.elems + b.elems) % a.q, a.q)


def vec_sub(a: ZqVector, b: ZqVector) -> ZqVector:
    _check_pair(a, b)
    metering.charge(len(a))
    return ZqVector._trusted((a.elems - b.elems) % a.q, a.q)


def scalar_mul(s: int, v: ZqVector) -> ZqVector:
    if not 0 <= s < v.q:
        raise DimensionMismatch(f"scalar {s} not a residue mod {v.q}")
    metering.charge(len(v))
    return ZqVector._trusted((int(s) * v.elems) % v.q, v.q)


def mat_vec_mul(a: ZqMatrix, v: ZqVector) -> ZqVector:
    if a.q != v.q:
        raise DimensionMismatch(f"moduli differ: {a.q} vs {v.q}")
    if a.cols != len(v):
        raise DimensionMismatch(f"matrix has {a.cols} columns, vector {len(v)}")
    metering.charge(2 * a.rows * a.cols)
    return ZqVector._trusted((a.elems @ v.elems) % a.q, a.q)


def perm_apply(p: Permutation, v: ZqVector) -> ZqVector:
    if p.size != len(v):
        raise DimensionMismatch(f"permutation size {p.size} vs vector {len(v)}")
    metering.charge(p.size)
    out = np.empty_like(v.elems)
    out[p.map] = v.elems
    return ZqVector._trusted(out, v.q)


def perm_invert(p: Permutation) -> Permutation:
    inv = np.empty_like(p.map)
    inv[p.map] = np.arange(p.size)
    return Permutation(inv)


def mat_perm_compose(a: ZqMatrix, p: Permutation) -> ZqMatrix:
    """Return the matrix A.P, i.e. ``x -> A(perm_apply(p, x))``."""
    if a.cols != p.size:
        raise DimensionMismatch(f"matrix has {a.cols} columns, permutation {p.size}")
    return ZqMatrix._trusted(a.elems[:, p.map], a.q)


def concat(a: ZqVector, b: ZqVector) -> ZqVector:
    if a.q != b.q:
        raise DimensionMismatch(f"moduli differ: {a.q} vs {b.q}")
    return ZqVector._trusted(np.concatenate([a.elems, b.elems]), a.q)


def norm_p(v: ZqVector, p: float = 2) -> float:
    """l_p norm of the residues taken as the integers 0..q-1."""
    if p < 1:
        raise ValueError("norm exponent must be >= 1")
    vals = v.elems.astype(np.float64)
    if math.isinf(p):
        return float(vals.max(initial=0.0))
    return float(np.sum(vals**p) ** (1.0 / p))


class Rng:
    """Deterministic random stream seeded by 32 bytes.

    Backed by numpy's PCG64.  :meth:`child` derives an independent stream
    from the seed and a label, so roles can each own one.
    """

    def __init__(self, seed: bytes | int):
        if isinstance(seed, int):
            seed = seed.to_bytes(32, "big")
        if len(seed) != 32:
            raise ValueError("seed must be exactly 32 bytes")
        self.seed = bytes(seed)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(int.from_bytes(self.seed, "big")))
        )

    def child(self, label: str) -> "Rng":
        return Rng(hashlib.sha256(self.seed + b"/" + label.encode()).digest())

    def residue(self, q: int) -> int:
        metering.charge(1)
        return int(self._gen.integers(0, q))

    def zq_vector(self, length: int, q: int) -> ZqVector:
        if length <= 0:
            raise ValueError("length must be positive")
        metering.charge(length)
        return ZqVector._trusted(self._gen.integers(0, q, size=length), q)

    def binary_vector(self, length: int, q: int) -> ZqVector:
        if length <= 0:
            raise ValueError("length must be positive")
        metering.charge(length)
        return ZqVector._trusted(self._gen.integers(0, 2, size=length), q)

    def zq_matrix(self, rows: int, cols: int, q: int) -> ZqMatrix:
        return ZqMatrix._trusted(self._gen.integers(0, q, size=(rows, cols)), q)

    def permutation(self, m: int) -> Permutation:
        return Permutation(self._gen.permutation(m))

    def integers(self, low: int, high: int) -> int:
        """Uniform integer in [low, high); uncharged utility draw."""
        return int(self._gen.integers(low, high))

    def randbytes(self, k: int) -> bytes:
        return self._gen.bytes(k)


def sample_zq_vector(rng: Rng, length: int, q: int) -> ZqVector:
    return rng.zq_vector(length, q)


def sample_binary_vector(rng: Rng, length: int, q: int) -> ZqVector:
    return rng.binary_vector(length, q)
