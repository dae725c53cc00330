"""Bit-exact frame codec for protocol messages.

Frame layout (all big-endian, MSB-first)::

    version:u8 (=1) | msg_type:u8 (1..7) | params_tag:u16 | payload

The payload is the message fields in ``FIELDS`` order: residues (scalars
and vector elements) take ceil(log2 q) bits each, digests take l bits.
The bit stream is zero-padded once, at the end, to a byte boundary.
``params_tag`` is the first two bytes of SHA-256 over (n, m, q, l).
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from . import bitpack
from .credentials import Params
from .errors import DimensionMismatch, Malformed
from .messages import MESSAGE_CLASSES, MsgType
from .zq import ZqVector

VERSION = 1
HEADER_BYTES = 4
_HEADER = struct.Struct(">BBH")


def params_tag(params: Params) -> int:
    blob = struct.pack(">4sIIII", b"LTPT", params.n, params.m, params.q, params.l)
    return int.from_bytes(hashlib.sha256(blob).digest()[:2], "big")


def _field_bits(kind: str, params: Params) -> int:
    if kind == "scalar":
        return params.residue_bits
    if kind == "vector":
        return params.m * params.residue_bits
    return params.l


def payload_bits(msg_type: MsgType, params: Params) -> int:
    """Pre-padding payload size of a message kind."""
    cls = MESSAGE_CLASSES[MsgType(msg_type)]
    return sum(_field_bits(kind, params) for _, kind in cls.FIELDS)


def measured_bits(msg, params: Params) -> int:
    return payload_bits(msg.TYPE, params)


def frame_bytes(msg_type: MsgType, params: Params) -> int:
    return HEADER_BYTES + bitpack.packed_len(payload_bits(msg_type, params))


def encode(msg, params: Params) -> bytes:
    w = params.residue_bits
    chunks = []
    for name, kind in msg.FIELDS:
        value = getattr(msg, name)
        if kind == "scalar":
            if not 0 <= int(value) < params.q:
                raise DimensionMismatch(f"{name}={value} is not a residue mod {params.q}")
            chunks.append(bitpack.uints_to_bits([int(value)], w))
        elif kind == "vector":
            if not isinstance(value, ZqVector) or len(value) != params.m or value.q != params.q:
                raise DimensionMismatch(f"{name} must be a length-{params.m} vector mod {params.q}")
            chunks.append(bitpack.uints_to_bits(value.elems, w))
        else:
            if len(value) != params.digest_bytes:
                raise DimensionMismatch(f"{name} must be {params.digest_bytes} bytes")
            chunks.append(bitpack.bytes_to_bits(bytes(value), params.l))
    bits = np.concatenate(chunks)
    header = _HEADER.pack(VERSION, int(msg.TYPE), params_tag(params))
    return header + bitpack.bits_to_bytes(bits)


def peek_type(data: bytes) -> MsgType:
    if len(data) < HEADER_BYTES:
        raise Malformed("frame shorter than header")
    version, mtype, _ = _HEADER.unpack_from(data)
    if version != VERSION:
        raise Malformed(f"unsupported version {version}")
    try:
        return MsgType(mtype)
    except ValueError:
        raise Malformed(f"unknown message type {mtype}") from None


def decode(data: bytes, params: Params):
    mtype = peek_type(data)
    _, _, tag = _HEADER.unpack_from(data)
    if tag != params_tag(params):
        raise DimensionMismatch(f"frame params tag {tag:#06x} does not match {params.short()}")
    nbits = payload_bits(mtype, params)
    if len(data) != HEADER_BYTES + bitpack.packed_len(nbits):
        raise Malformed(f"{mtype.name} frame has wrong length {len(data)}")
    bits = bitpack.bytes_to_bits(data[HEADER_BYTES:])
    if bits[nbits:].any():
        raise Malformed("nonzero padding bits")
    w = params.residue_bits
    cls = MESSAGE_CLASSES[mtype]
    values = {}
    pos = 0
    for name, kind in cls.FIELDS:
        width = _field_bits(kind, params)
        seg = bits[pos : pos + width]
        pos += width
        if kind == "digest":
            values[name] = bitpack.bits_to_bytes(seg)
            continue
        vals = bitpack.bits_to_uints(seg, w)
        if vals.max(initial=0) >= params.q:
            raise Malformed(f"{name} holds a value >= q")
        if kind == "scalar":
            values[name] = int(vals[0])
        else:
            values[name] = ZqVector._trusted(vals, params.q)
    return cls(**values)
