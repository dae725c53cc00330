"""The seven on-wire messages of one authentication run.

Each class lists its fields in wire order in ``FIELDS`` as
``(name, kind)`` pairs, kind being ``"scalar"``, ``"vector"`` or
``"digest"``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from typing import ClassVar

from .zq import ZqVector

Digest = bytes


class MsgType(enum.IntEnum):
    QUERY = 1
    TAG_COMMIT = 2
    READER_COMMIT = 3
    SERVER_CHALLENGE = 4
    READER_PROOF = 5
    SERVER_CONFIRM = 6
    TAG_CONFIRM = 7


@dataclass(frozen=True)
class Query:
    alpha: int

    TYPE: ClassVar[MsgType] = MsgType.QUERY
    FIELDS: ClassVar[tuple] = (("alpha", "scalar"),)


@dataclass(frozen=True)
class TagCommit:
    beta: ZqVector
    c1: ZqVector
    c3: ZqVector
    c2: Digest

    TYPE: ClassVar[MsgType] = MsgType.TAG_COMMIT
    FIELDS: ClassVar[tuple] = (
        ("beta", "vector"),
        ("c1", "vector"),
        ("c3", "vector"),
        ("c2", "digest"),
    )


@dataclass(frozen=True)
class ReaderCommit:
    alpha: int
    gamma: int
    beta: ZqVector
    c1: ZqVector
    c3: ZqVector
    delta: ZqVector
    c6: ZqVector
    c8: ZqVector
    c2: Digest
    c7: Digest

    TYPE: ClassVar[MsgType] = MsgType.READER_COMMIT
    FIELDS: ClassVar[tuple] = (
        ("alpha", "scalar"),
        ("gamma", "scalar"),
        ("beta", "vector"),
        ("c1", "vector"),
        ("c3", "vector"),
        ("delta", "vector"),
        ("c6", "vector"),
        ("c8", "vector"),
        ("c2", "digest"),
        ("c7", "digest"),
    )


@dataclass(frozen=True)
class ServerChallenge:
    c11: ZqVector

    TYPE: ClassVar[MsgType] = MsgType.SERVER_CHALLENGE
    FIELDS: ClassVar[tuple] = (("c11", "vector"),)


@dataclass(frozen=True)
class ReaderProof:
    c13: Digest

    TYPE: ClassVar[MsgType] = MsgType.READER_PROOF
    FIELDS: ClassVar[tuple] = (("c13", "digest"),)


@dataclass(frozen=True)
class ServerConfirm:
    c14: Digest
    c15: Digest

    TYPE: ClassVar[MsgType] = MsgType.SERVER_CONFIRM
    FIELDS: ClassVar[tuple] = (("c14", "digest"), ("c15", "digest"))


@dataclass(frozen=True)
class TagConfirm:
    c14: Digest

    TYPE: ClassVar[MsgType] = MsgType.TAG_CONFIRM
    FIELDS: ClassVar[tuple] = (("c14", "digest"),)


Message = Query | TagCommit | ReaderCommit | ServerChallenge | ReaderProof | ServerConfirm | TagConfirm

MESSAGE_CLASSES = {
    cls.TYPE: cls
    for cls in (Query, TagCommit, ReaderCommit, ServerChallenge, ReaderProof, ServerConfirm, TagConfirm)
}


def vector_fields(msg) -> dict[str, ZqVector]:
    return {name: getattr(msg, name) for name, kind in msg.FIELDS if kind == "vector"}


def with_field(msg, name: str, value):
    """Copy of ``msg`` with one field replaced."""
    if name not in {f.name for f in fields(msg)}:
        raise KeyError(f"{type(msg).__name__} has no field {name!r}")
    return replace(msg, **{name: value})
