"""Parameter sets, tag/reader credentials and the server registry.

A credential is an ISIS instance with a known short solution: the server
samples a nonzero binary identity ``x``, a uniform matrix ``A`` and a
secret permutation ``P``, then publishes ``y = A.x mod q`` to the device.
The registry keeps, per device, ``x``, ``P``, ``P^-1``, ``y`` and the
precomputed product ``A.P^-1`` used to open the device's commitments.
"""

from __future__ import annotations

import enum
import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import bitpack
from .errors import DimensionMismatch, FormatError, InvalidCredential, ParameterError
from .zq import (
    MAX_Q,
    Permutation,
    Rng,
    ZqMatrix,
    ZqVector,
    mat_perm_compose,
    mat_vec_mul,
    norm_p,
    perm_apply,
    perm_invert,
)

MAGIC = b"LTC1"
_HEADER = struct.Struct(">4sBIIIIHd")


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    for d in range(2, math.isqrt(q) + 1):
        if q % d == 0:
            return False
    return True


@dataclass(frozen=True)
class Params:
    """Dimensions and bounds: A is n x m over Z_q, digests are l bits."""

    n: int
    m: int
    q: int
    p: int = 2
    sigma: float | None = None
    l: int = 256

    def __post_init__(self):
        if self.sigma is None:
            object.__setattr__(self, "sigma", math.sqrt(self.m))
        if not (1 <= self.n < self.m):
            raise ParameterError(f"need m > n >= 1, got n={self.n}, m={self.m}")
        if not _is_prime(self.q) or self.q > MAX_Q:
            raise ParameterError(f"q={self.q} must be a prime below {MAX_Q}")
        if self.l < 128:
            raise ParameterError(f"digest length l={self.l} must be >= 128")
        if self.sigma <= 0:
            raise ParameterError("sigma must be positive")
        if not 1 <= self.p < 1 << 16:
            raise ParameterError("norm exponent p must be in 1..65535")

    @property
    def residue_bits(self) -> int:
        """Whole bits needed per residue, i.e. ceil(log2 q)."""
        return (self.q - 1).bit_length()

    @property
    def index_bits(self) -> int:
        return (self.m - 1).bit_length()

    @property
    def digest_bytes(self) -> int:
        return (self.l + 7) // 8

    def short(self) -> str:
        return f"(n={self.n}, m={self.m}, q={self.q}, l={self.l})"


HEADLINE = Params(n=64, m=2048, q=257, l=256)
SMALL = Params(n=2, m=8, q=17, l=256)


class Role(enum.IntEnum):
    TAG = 0
    READER = 1


@dataclass(frozen=True, eq=False)
class Credential:
    role: Role
    params: Params
    x: ZqVector
    perm: Permutation
    a: ZqMatrix
    y: ZqVector

    @cached_property
    def perm_inv(self) -> Permutation:
        return perm_invert(self.perm)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Credential):
            return NotImplemented
        return (
            self.role == other.role
            and self.params == other.params
            and self.x == other.x
            and self.perm == other.perm
            and self.a == other.a
            and self.y == other.y
        )

    def problems(self) -> list[str]:
        """Invariant violations, empty when the credential is sound."""
        pr = self.params
        out = []
        if len(self.x) != pr.m or self.a.rows != pr.n or self.a.cols != pr.m:
            out.append("dimensions do not match params")
            return out
        if len(self.y) != pr.n or self.perm.size != pr.m:
            out.append("dimensions do not match params")
            return out
        if self.x.is_zero():
            out.append("identity vector is zero")
        if norm_p(self.x, pr.p) > pr.sigma * (1 + 1e-12):
            out.append(f"norm of x exceeds sigma={pr.sigma:.4g}")
        if mat_vec_mul(self.a, self.x) != self.y:
            out.append("A.x != y")
        return out

    def check(self) -> None:
        bad = self.problems()
        if bad:
            raise InvalidCredential("; ".join(bad))


def generate_credential(params: Params, role: Role, rng: Rng) -> Credential:
    """Sample x (nonzero binary), A, P uniformly and derive y = A.x."""
    if not isinstance(params, Params):
        raise ParameterError("params must be a Params instance")
    while True:
        x = rng.binary_vector(params.m, params.q)
        if not x.is_zero():
            break
    a = rng.zq_matrix(params.n, params.m, params.q)
    perm = rng.permutation(params.m)
    return Credential(Role(role), params, x, perm, a, mat_vec_mul(a, x))


@dataclass(frozen=True, eq=False)
class RegistryRecord:
    device_handle: int
    role: Role
    x: ZqVector
    perm: Permutation
    perm_inv: Permutation
    y: ZqVector
    a_perm_inv: ZqMatrix
    credential: Credential


@dataclass
class ServerRegistry:
    params: Params
    tags: list[RegistryRecord] = field(default_factory=list)
    readers: list[RegistryRecord] = field(default_factory=list)

    def records(self, role: Role) -> list[RegistryRecord]:
        return self.tags if role == Role.TAG else self.readers

    def lookup(self, role: Role, handle: int) -> RegistryRecord:
        recs = self.records(role)
        if not 0 <= handle < len(recs):
            raise KeyError(f"no {Role(role).name.lower()} with handle {handle}")
        return recs[handle]

    def __len__(self) -> int:
        return len(self.tags) + len(self.readers)


def _probe_consistency(a_perm_inv: ZqMatrix, cred: Credential, handle: int) -> bool:
    probe_rng = Rng(hashlib.sha256(b"registry-probe" + handle.to_bytes(4, "big")).digest())
    for _ in range(8):
        v = probe_rng.zq_vector(cred.params.m, cred.params.q)
        if mat_vec_mul(a_perm_inv, perm_apply(cred.perm, v)) != mat_vec_mul(cred.a, v):
            return False
    return True


def register(registry: ServerRegistry, cred: Credential) -> int:
    """Store ``cred`` with its precomputed opening material; return its handle."""
    if cred.params != registry.params:
        raise InvalidCredential("credential params differ from registry params")
    cred.check()
    recs = registry.records(cred.role)
    handle = len(recs)
    a_perm_inv = mat_perm_compose(cred.a, cred.perm_inv)
    if not _probe_consistency(a_perm_inv, cred, handle):
        raise InvalidCredential("A.P^-1 precomputation failed probe check")
    recs.append(
        RegistryRecord(handle, cred.role, cred.x, cred.perm, cred.perm_inv, cred.y, a_perm_inv, cred)
    )
    return handle


# ---------------------------------------------------------------------------
# file formats


def credential_to_bytes(cred: Credential) -> bytes:
    pr = cred.params
    if cred.x.elems.max(initial=0) > 1:
        raise InvalidCredential("file format stores binary identities only")
    head = _HEADER.pack(MAGIC, int(cred.role), pr.n, pr.m, pr.q, pr.l, pr.p, pr.sigma)
    x_bytes = bitpack.bits_to_bytes(cred.x.elems.astype(np.uint8))
    perm_bytes = bitpack.bits_to_bytes(bitpack.uints_to_bits(cred.perm.map, pr.index_bits))
    a_bytes = cred.a.elems.astype(">u2").tobytes()
    y_bytes = cred.y.elems.astype(">u2").tobytes()
    return head + x_bytes + perm_bytes + a_bytes + y_bytes


def _block_size(n: int, m: int) -> int:
    index_bits = (m - 1).bit_length()
    return (
        _HEADER.size
        + bitpack.packed_len(m)
        + bitpack.packed_len(m * index_bits)
        + 2 * n * m
        + 2 * n
    )


def credential_from_bytes(data: bytes, offset: int = 0) -> tuple[Credential, int]:
    """Parse one credential block at ``offset``; return it and the next offset."""
    if len(data) - offset < _HEADER.size:
        raise FormatError("truncated credential header")
    magic, role, n, m, q, l, p, sigma = _HEADER.unpack_from(data, offset)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if role not in (0, 1):
        raise FormatError(f"bad role byte {role}")
    try:
        params = Params(n=n, m=m, q=q, p=p, sigma=sigma, l=l)
    except ParameterError as exc:
        raise FormatError(f"bad parameters: {exc}") from exc
    end = offset + _block_size(n, m)
    if len(data) < end:
        raise FormatError("truncated credential body")
    pos = offset + _HEADER.size

    def take(k: int) -> bytes:
        nonlocal pos
        chunk = data[pos : pos + k]
        pos += k
        return chunk

    x_raw = take(bitpack.packed_len(m))
    x_bits = bitpack.bytes_to_bits(x_raw)
    if x_bits[m:].any():
        raise FormatError("nonzero padding after identity bits")
    perm_raw = take(bitpack.packed_len(m * params.index_bits))
    perm_bits = bitpack.bytes_to_bits(perm_raw)
    if perm_bits[m * params.index_bits :].any():
        raise FormatError("nonzero padding after permutation")
    a_vals = np.frombuffer(take(2 * n * m), dtype=">u2").astype(np.int64).reshape(n, m)
    y_vals = np.frombuffer(take(2 * n), dtype=">u2").astype(np.int64)
    try:
        cred = Credential(
            Role(role),
            params,
            ZqVector(x_bits[:m], q),
            Permutation(bitpack.bits_to_uints(perm_bits[: m * params.index_bits], params.index_bits)),
            ZqMatrix(a_vals, q),
            ZqVector(y_vals, q),
        )
    except DimensionMismatch as exc:
        raise FormatError(str(exc)) from exc
    bad = cred.problems()
    if bad:
        raise FormatError("; ".join(bad))
    return cred, end


def save_credential(cred: Credential, path) -> None:
    Path(path).write_bytes(credential_to_bytes(cred))


def load_credential(path) -> Credential:
    data = Path(path).read_bytes()
    cred, end = credential_from_bytes(data)
    if end != len(data):
        raise FormatError("trailing bytes after credential")
    return cred


def registry_to_bytes(registry: ServerRegistry) -> bytes:
    parts = []
    for role in (Role.TAG, Role.READER):
        recs = registry.records(role)
        parts.append(struct.pack(">I", len(recs)))
        parts.extend(credential_to_bytes(r.credential) for r in recs)
    return b"".join(parts)


def registry_from_bytes(data: bytes, params: Params | None = None) -> ServerRegistry:
    pos = 0
    creds: list[Credential] = []
    for role in (Role.TAG, Role.READER):
        if len(data) - pos < 4:
            raise FormatError("truncated registry count")
        (count,) = struct.unpack_from(">I", data, pos)
        pos += 4
        for _ in range(count):
            cred, pos = credential_from_bytes(data, pos)
            if cred.role != role:
                raise FormatError("credential filed under the wrong role")
            creds.append(cred)
    if pos != len(data):
        raise FormatError("trailing bytes after registry")
    if params is None:
        if not creds:
            raise FormatError("empty registry carries no parameters")
        params = creds[0].params
    registry = ServerRegistry(params)
    for cred in creds:
        try:
            register(registry, cred)
        except InvalidCredential as exc:
            raise FormatError(str(exc)) from exc
    return registry


def save_registry(registry: ServerRegistry, path) -> None:
    Path(path).write_bytes(registry_to_bytes(registry))


def load_registry(path, params: Params | None = None) -> ServerRegistry:
    return registry_from_bytes(Path(path).read_bytes(), params)
