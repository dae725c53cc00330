"""Closed-form storage / communication / computation costs, and counters.

Two conventions for the size of a residue:

* ``REAL_LOG`` (CLI name ``paper``): real-valued log2 q bits
  (log2 257 ~ 8.006); reproduces the published megabyte/kilobyte figures.
* ``CEIL_LOG`` (CLI name ``wire``): ceil(log2 q) bits, what a frame
  actually carries.

Storage and communication are in bits; MB and KB below mean 2**23 and
2**13 bits.  Computation is in abstract operations, see
:mod:`latticetag.metering` for the charging rules.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

from . import metering
from .credentials import Credential, ServerRegistry
from .errors import CounterMismatch, ParameterError
from .session import run_session
from .zq import Rng

MB_BITS = 1 << 23
KB_BITS = 1 << 13

# headline figures as printed (storage MB, communication KB)
PUBLISHED_STORAGE_MB = {"tag": 0.129, "reader": 0.132, "server": 0.515}
PUBLISHED_COMM_KB = {"reader-tag": 6.06, "reader-server": 14.16}


class Convention(str, enum.Enum):
    REAL_LOG = "paper"
    CEIL_LOG = "wire"

    def __str__(self) -> str:
        return self.value


def _dims(params):
    try:
        m, n, q, l = int(params.m), int(params.n), int(params.q), int(params.l)
    except AttributeError as exc:
        raise ParameterError(f"params lacks a field: {exc}") from exc
    if m < 0 or n < 0 or l < 0 or q < 2:
        raise ParameterError(f"invalid dimensions m={m} n={n} q={q} l={l}")
    return m, n, q, l


def _log(x: int, convention: Convention) -> float:
    if convention == Convention.REAL_LOG:
        return math.log2(x)
    return float((x - 1).bit_length())


# storage ------------------------------------------------------------------


def storage_cost(params, convention=Convention.REAL_LOG) -> dict[str, float]:
    """Bits stored by tag, reader and server."""
    convention = Convention(convention)
    m, n, q, _ = _dims(params)
    if m < 1:
        raise ParameterError("storage cost needs m >= 1")
    lq, lm = _log(q, convention), _log(m, convention)
    out = {
        "tag": m * lq + m * lm + n * m * lq,
        "reader": m * lq + 2 * m * lm + n * m * lq,
        "server": 2 * m * lq + 2 * n * lq + 4 * m * lm + 4 * n * m * lq,
    }
    out["total"] = out["tag"] + out["reader"] + out["server"]
    return out


# communication ------------------------------------------------------------

COMM_ROWS = (
    "reader->tag(1)",
    "tag->reader",
    "reader->server(1)",
    "server->reader(1)",
    "reader->server(2)",
    "server->reader(2)",
    "reader->tag(2)",
)


def communication_cost(params, convention=Convention.REAL_LOG) -> dict[str, float]:
    """Bits per message hop plus per-channel aggregates and the total."""
    convention = Convention(convention)
    m, n, q, l = _dims(params)
    lq = _log(q, convention)
    rows = {
        "reader->tag(1)": lq,
        "tag->reader": 3 * m * lq + l,
        "reader->server(1)": 6 * m * lq + 2 * l + 2 * lq,
        "server->reader(1)": m * lq,
        "reader->server(2)": l,
        "server->reader(2)": 2 * l,
        "reader->tag(2)": l,
    }
    out = dict(rows)
    out["reader-tag"] = rows["reader->tag(1)"] + rows["tag->reader"] + rows["reader->tag(2)"]
    out["reader-server"] = sum(
        rows[k] for k in ("reader->server(1)", "server->reader(1)", "reader->server(2)", "server->reader(2)")
    )
    out["total"] = out["reader-tag"] + out["reader-server"]
    return out


# computation --------------------------------------------------------------

# per-value costs as coefficient tuples (m, n, mn, const)
VALUE_COSTS = {
    "tag": {
        "x1": (1, 0, 0, 0),
        "u_t": (1, 0, 0, 0),
        "beta": (3, 0, 0, 0),
        "c1": (2, 0, 0, 0),
        "c3": (2, 0, 0, 0),
        "c2": (1, 1, 2, 0),
        "c14": (3, 0, 0, 0),
    },
    "reader": {
        "alpha": (0, 0, 0, 1),
        "gamma": (0, 0, 0, 1),
        "x2": (1, 0, 0, 0),
        "u_r": (1, 0, 0, 0),
        "c6": (2, 0, 0, 0),
        "c7": (2, 0, 0, 0),
        "c8": (2, 0, 0, 0),
        "c12": (2, 0, 0, 0),
        "c13": (2, 0, 0, 0),
        "delta": (3, 0, 0, 0),
        "c15": (3, 0, 0, 0),
    },
    "server": {
        "c9": (0, 2, 2, 0),
        "c4": (0, 2, 2, 0),
        "c10": (2, 0, 0, 0),
        "c5": (2, 0, 0, 0),
        "c2": (2, 0, 0, 0),
        "c7": (2, 0, 0, 0),
        "c13": (2, 0, 0, 0),
        "x_s": (1, 0, 0, 0),
        "c11": (4, 0, 0, 0),
        "c14": (4, 0, 0, 0),
        "c15": (4, 0, 0, 0),
    },
}

ENTITIES = ("tag", "reader", "server")


def formula_value_costs(params) -> dict[str, dict[str, int]]:
    m, n, _, _ = _dims(params)
    return {
        ent: {lbl: a * m + b * n + c * m * n + d for lbl, (a, b, c, d) in rows.items()}
        for ent, rows in VALUE_COSTS.items()
    }


def computation_cost(params) -> dict[str, int]:
    """Closed-form operation counts per entity; independent of q."""
    m, n, _, _ = _dims(params)
    out = {
        "tag": 13 * m + n + 2 * m * n,
        "reader": 18 * m + 2,
        "server": 23 * m + 4 * n + 4 * m * n,
    }
    out["total"] = out["tag"] + out["reader"] + out["server"]
    return out


@dataclass
class SessionCostReport:
    """Instrumented counts for one honest session next to the closed forms."""

    measured: dict[str, int]
    expected: dict[str, int]
    per_value: dict[str, dict[str, int]]
    formula_per_value: dict[str, dict[str, int]]
    scan_overhead: int
    records_tried: dict[str, int]
    success: bool
    residues: dict[tuple[str, str], int] = field(default_factory=dict)

    @property
    def matches(self) -> bool:
        return all(self.measured[e] == self.expected[e] for e in ENTITIES)


def instrumented_session_cost(
    registry: ServerRegistry,
    cred_t: Credential,
    cred_r: Credential,
    rng: Rng,
    strict: bool = False,
) -> SessionCostReport:
    """Run one honest session with counters wired into the primitives.

    Registry trial scans beyond the matching record are excluded from the
    per-entity totals and reported as ``scan_overhead``.  With ``strict``
    any deviation from the closed forms raises :class:`CounterMismatch`.
    """
    counter = metering.OpCounter()
    with metering.metered(counter):
        run = run_session(registry, cred_t, cred_r, rng)
    measured = {e: counter.entity_total(e) for e in ENTITIES}
    expected = computation_cost(registry.params)
    per_value = {e: counter.values(e) for e in ENTITIES}
    formula = formula_value_costs(registry.params)
    residues = {}
    for ent in ENTITIES:
        for lbl in sorted(set(formula[ent]) | set(per_value[ent])):
            diff = per_value[ent].get(lbl, 0) - formula[ent].get(lbl, 0)
            if diff:
                residues[(ent, lbl)] = diff
    report = SessionCostReport(
        measured=measured,
        expected={e: expected[e] for e in ENTITIES},
        per_value=per_value,
        formula_per_value=formula,
        scan_overhead=counter.scan_overhead,
        records_tried=dict(counter.records_tried),
        success=run.outcome.success,
        residues=residues,
    )
    if strict and not report.matches:
        detail = ", ".join(f"{e}.{lbl}: {d:+d}" for (e, lbl), d in residues.items())
        raise CounterMismatch(f"counters deviate from closed forms ({detail})", residues)
    return report


# CSV ----------------------------------------------------------------------

CSV_COLUMNS = (
    ["m", "n", "q", "l", "convention"]
    + [f"storage_{e}_bits" for e in ("tag", "reader", "server", "total")]
    + [f"storage_{e}_mb" for e in ("tag", "reader", "server")]
    + [f"comm_{r}_bits" for r in COMM_ROWS]
    + ["comm_reader-tag_bits", "comm_reader-server_bits", "comm_total_bits"]
    + ["comm_reader-tag_kb", "comm_reader-server_kb"]
    + [f"compute_{e}_ops" for e in ("tag", "reader", "server", "total")]
    + ["note"]
)


@dataclass(frozen=True)
class Dims:
    """Bare dimensions for sweeps (no primality or range checks)."""

    m: int
    n: int
    q: int
    l: int


def cost_row(params, convention) -> dict:
    convention = Convention(convention)
    m, n, q, l = _dims(params)
    st = storage_cost(params, convention)
    cm = communication_cost(params, convention)
    cp = computation_cost(params)
    row = {"m": m, "n": n, "q": q, "l": l, "convention": convention.value}
    for e in ("tag", "reader", "server", "total"):
        row[f"storage_{e}_bits"] = st[e]
    for e in ("tag", "reader", "server"):
        row[f"storage_{e}_mb"] = st[e] / MB_BITS
    for r in COMM_ROWS + ("reader-tag", "reader-server", "total"):
        row[f"comm_{r}_bits"] = cm[r]
    row["comm_reader-tag_kb"] = cm["reader-tag"] / KB_BITS
    row["comm_reader-server_kb"] = cm["reader-server"] / KB_BITS
    for e in ("tag", "reader", "server", "total"):
        row[f"compute_{e}_ops"] = cp[e]
    row["note"] = ""
    if (m, n, q, l) == (2048, 64, 257, 256) and convention == Convention.REAL_LOG:
        row["note"] = (
            "published: storage 0.129/0.132/0.515 MB, comm 6.06/14.16 KB; "
            f"here {row['storage_tag_mb']:.3f}/{row['storage_reader_mb']:.3f}/"
            f"{row['storage_server_mb']:.3f} MB, {row['comm_reader-tag_kb']:.2f}/"
            f"{row['comm_reader-server_kb']:.2f} KB"
        )
    return row


def sweep(ms, n=64, q=257, l=256, conventions=(Convention.REAL_LOG,)) -> list[dict]:
    rows = []
    for m in ms:
        for conv in conventions:
            rows.append(cost_row(Dims(m=m, n=n, q=q, l=l), conv))
    return rows


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}" if not v.is_integer() else str(int(v))
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()
