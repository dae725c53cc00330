"""Abstract operation counting hooked into the arithmetic and hash layers.

Counting is off unless an :class:`OpCounter` is activated with
:func:`metered`.  Protocol code labels what it is computing with
:func:`computing`; every primitive then charges its cost to the active
``(entity, label)`` pair.  Charges follow these rules:

* random vector of length k: k; random residue: 1
* H1: total number of input elements; H2: input length + output length
* permutation multiply: m; vector add/sub and scalar multiply: vector length
* n x m matrix times vector: 2nm
"""

from __future__ import annotations

from collections import defaultdict
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field


@dataclass
class OpCounter:
    """Per-entity, per-value operation tallies for one session."""

    by_value: dict = field(default_factory=lambda: defaultdict(int))
    scan_overhead: int = 0
    records_tried: dict = field(default_factory=dict)

    def add(self, entity: str, label: str, ops: int) -> None:
        self.by_value[(entity, label)] += ops

    def merge(self, other: "OpCounter") -> None:
        for key, ops in other.by_value.items():
            self.by_value[key] += ops
        self.scan_overhead += other.scan_overhead

    def entity_total(self, entity: str) -> int:
        return sum(v for (e, _), v in self.by_value.items() if e == entity)

    def totals(self) -> dict[str, int]:
        entities = sorted({e for e, _ in self.by_value})
        return {e: self.entity_total(e) for e in entities}

    def values(self, entity: str) -> dict[str, int]:
        return {lbl: v for (e, lbl), v in self.by_value.items() if e == entity}

    def reset(self) -> None:
        self.by_value.clear()
        self.scan_overhead = 0
        self.records_tried.clear()


@dataclass(frozen=True)
class _Active:
    counter: OpCounter
    entity: str | None = None
    label: str | None = None


_active: ContextVar[_Active | None] = ContextVar("latticetag_meter", default=None)


@contextmanager
def metered(counter: OpCounter):
    """Route all primitive charges inside the block to ``counter``."""
    token = _active.set(_Active(counter))
    try:
        yield counter
    finally:
        _active.reset(token)


@contextmanager
def computing(entity: str, label: str):
    """Attribute charges inside the block to ``(entity, label)``."""
    cur = _active.get()
    if cur is None:
        yield
        return
    token = _active.set(_Active(cur.counter, entity, label))
    try:
        yield
    finally:
        _active.reset(token)


@contextmanager
def trial():
    """Collect charges into a scratch counter (for registry trial scans).

    Yields the scratch counter, or ``None`` when metering is off.  The
    caller decides whether to merge it or book it as scan overhead.
    """
    cur = _active.get()
    if cur is None:
        yield None
        return
    scratch = OpCounter()
    token = _active.set(_Active(scratch, cur.entity, cur.label))
    try:
        yield scratch
    finally:
        _active.reset(token)


def active_counter() -> OpCounter | None:
    cur = _active.get()
    return None if cur is None else cur.counter


def charge(ops: int) -> None:
    cur = _active.get()
    if cur is None or cur.entity is None:
        return
    cur.counter.add(cur.entity, cur.label, int(ops))
