"""MSB-first fixed-width bit packing on numpy bit arrays."""

from __future__ import annotations

import numpy as np


def uints_to_bits(values, width: int) -> np.ndarray:
    vals = np.asarray(values, dtype=np.int64).reshape(-1)
    if width == 0:
        return np.zeros(0, dtype=np.uint8)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((vals[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def bits_to_uints(bits: np.ndarray, width: int) -> np.ndarray:
    if width == 0:
        return np.zeros(0, dtype=np.int64)
    grid = np.asarray(bits, dtype=np.int64).reshape(-1, width)
    weights = np.int64(1) << np.arange(width - 1, -1, -1, dtype=np.int64)
    return grid @ weights


def bytes_to_bits(data: bytes, nbits: int | None = None) -> np.ndarray:
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    return bits if nbits is None else bits[:nbits]


def bits_to_bytes(bits: np.ndarray) -> bytes:
    """Pack bits, zero-padding the tail to a byte boundary."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def packed_len(nbits: int) -> int:
    return (nbits + 7) // 8
