"""Hash primitives H1 (fixed l-bit digest) and H2 (expander to m-n residues).

Hash inputs are sequences of vectors and scalar residues.  They are encoded
injectively before hashing::

    count:u32be  then per component:  kind:u8  length:u32be  residue:u16be * length

with kind 0 for a vector and 1 for a scalar.  H1 and H2 prepend the
one-byte domain tags ``b"1"`` and ``b"2"`` respectively.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Sequence, Union

import numpy as np

from . import metering
from .errors import DimensionMismatch, FormatError
from .zq import ZqVector

Component = Union[ZqVector, int]

KIND_VECTOR = 0
KIND_RESIDUE = 1
H1_TAG = b"1"
H2_TAG = b"2"


def encode_components(components: Sequence[Component]) -> bytes:
    parts = [struct.pack(">I", len(components))]
    for comp in components:
        if isinstance(comp, ZqVector):
            parts.append(struct.pack(">BI", KIND_VECTOR, len(comp)))
            parts.append(comp.elems.astype(">u2").tobytes())
        else:
            value = int(comp)
            if not 0 <= value < 1 << 16:
                raise DimensionMismatch(f"scalar {value} does not fit in 16 bits")
            parts.append(struct.pack(">BIH", KIND_RESIDUE, 1, value))
    return b"".join(parts)


def decode_components(data: bytes, q: int) -> list[Component]:
    """Inverse of :func:`encode_components`."""
    try:
        (count,) = struct.unpack_from(">I", data, 0)
        pos = 4
        out: list[Component] = []
        for _ in range(count):
            kind, length = struct.unpack_from(">BI", data, pos)
            pos += 5
            raw = data[pos : pos + 2 * length]
            if len(raw) != 2 * length:
                raise FormatError("truncated component")
            pos += 2 * length
            vals = np.frombuffer(raw, dtype=">u2").astype(np.int64)
            if kind == KIND_VECTOR:
                out.append(ZqVector(vals, q))
            elif kind == KIND_RESIDUE and length == 1:
                out.append(int(vals[0]))
            else:
                raise FormatError(f"bad component kind {kind}")
    except struct.error as exc:
        raise FormatError(str(exc)) from exc
    if pos != len(data):
        raise FormatError("trailing bytes after last component")
    return out


def _input_size(components: Sequence[Component]) -> int:
    return sum(len(c) if isinstance(c, ZqVector) else 1 for c in components)


def h1(*components: Component, l: int = 256) -> bytes:
    """Fixed-length digest of ``l`` bits (SHA-256 at l=256, else SHAKE-256)."""
    if not components:
        raise ValueError("h1 needs at least one component")
    metering.charge(_input_size(components))
    data = H1_TAG + encode_components(components)
    nbytes = (l + 7) // 8
    if l == 256:
        return hashlib.sha256(data).digest()
    out = bytearray(hashlib.shake_256(data).digest(nbytes))
    if l % 8:
        out[-1] &= (0xFF << (8 - l % 8)) & 0xFF
    return bytes(out)


def h2(v: ZqVector, *, n: int, m: int) -> ZqVector:
    """Expand a length-n vector to m-n uniform residues mod q."""
    if len(v) != n:
        raise DimensionMismatch(f"h2 input must have length {n}, got {len(v)}")
    want = m - n
    q = v.q
    metering.charge(n + want)
    bound = q * ((1 << 16) // q)
    xof = hashlib.shake_128(H2_TAG + encode_components([v]))
    # expected chunks per output is 65536/bound < 2; start with some slack
    nbytes = 2 * (want + want // 2 + 16)
    while True:
        chunks = np.frombuffer(xof.digest(nbytes), dtype=">u2").astype(np.int64)
        accepted = chunks[chunks < bound]
        if accepted.size >= want:
            return ZqVector._trusted(accepted[:want] % q, q)
        nbytes *= 2
