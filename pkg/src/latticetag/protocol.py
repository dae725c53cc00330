"""Role-local steps of the tag / reader / server authentication run.

Each function is one protocol step.  Verification failures raise
:class:`AuthenticationFailed` carrying the :class:`FailureReason`; the
session driver turns that into an :class:`AuthOutcome`.  All arithmetic
is mod q.

Server-side record selection: messages carry no device identifier, so
the server tries every registered reader (then every tag) and keeps the
first record whose digest check passes *and* whose recovered identity
equals the stored one.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from . import metering
from .credentials import Credential, Params, Role, ServerRegistry
from .errors import RoleMismatch, StateError
from .hashing import h1, h2
from .messages import (
    Query,
    ReaderCommit,
    ReaderProof,
    ServerChallenge,
    ServerConfirm,
    TagCommit,
    TagConfirm,
)
from .zq import (
    Rng,
    ZqVector,
    concat,
    mat_vec_mul,
    perm_apply,
    scalar_mul,
    vec_add,
    vec_sub,
)


class FailureReason(str, enum.Enum):
    READER_REJECTED = "ReaderRejected"
    TAG_REJECTED = "TagRejected"
    PROOF_REJECTED = "ProofRejected"
    SERVER_REJECTED_BY_READER = "ServerRejectedByReader"
    SERVER_REJECTED_BY_TAG = "ServerRejectedByTag"
    UNKNOWN_DEVICE = "UnknownDevice"
    MALFORMED = "Malformed"
    INCOMPLETE = "Incomplete"

    def __str__(self) -> str:
        return self.value


# where each failure is detected, for reports
FAILING_CHECK = {
    FailureReason.READER_REJECTED: "step 4.1 (server checks c7)",
    FailureReason.TAG_REJECTED: "step 4.2 (server checks c2)",
    FailureReason.PROOF_REJECTED: "step 6.1 (server checks c13)",
    FailureReason.SERVER_REJECTED_BY_READER: "step 7 (reader checks c15)",
    FailureReason.SERVER_REJECTED_BY_TAG: "step 8 (tag checks c14)",
    FailureReason.UNKNOWN_DEVICE: "registry lookup",
    FailureReason.MALFORMED: "frame decoding",
    FailureReason.INCOMPLETE: "session stalled",
}


@dataclass(frozen=True)
class AuthOutcome:
    success: bool
    reason: FailureReason | None = None
    detail: str = ""

    @classmethod
    def ok(cls) -> "AuthOutcome":
        return cls(True)

    @classmethod
    def failed(cls, reason: FailureReason, detail: str = "") -> "AuthOutcome":
        return cls(False, FailureReason(reason), detail)

    def __str__(self) -> str:
        if self.success:
            return "success"
        return f"{self.reason.value}" + (f" ({self.detail})" if self.detail else "")


class AuthenticationFailed(Exception):
    def __init__(self, reason: FailureReason, detail: str = ""):
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = FailureReason(reason)
        self.detail = detail

    @property
    def outcome(self) -> AuthOutcome:
        return AuthOutcome.failed(self.reason, self.detail)


@dataclass
class TagSession:
    u_t: ZqVector
    x1: ZqVector
    alpha: int
    l: int = 256
    consumed: bool = False


@dataclass
class ReaderSession:
    gamma: int
    u_r: ZqVector
    x2: ZqVector
    alpha: int
    l: int = 256
    state: str = "committed"


@dataclass
class ServerSession:
    x_s: ZqVector
    x2_expected: ZqVector
    tag_handle: int
    reader_handle: int
    alpha: int
    gamma: int
    beta: ZqVector
    c1: ZqVector
    delta: ZqVector
    c6: ZqVector
    # opened values, kept for inspection
    c4: ZqVector
    c5: ZqVector
    c9: ZqVector
    c10: ZqVector
    c11: ZqVector
    consumed: bool = False


def _require_role(cred: Credential, role: Role) -> None:
    if cred.role != role:
        raise RoleMismatch(f"expected a {role.name.lower()} credential, got {cred.role.name.lower()}")


def _padded(v: ZqVector, params: Params) -> ZqVector:
    """(v || H2(v)) for a length-n vector v."""
    return concat(v, h2(v, n=params.n, m=params.m))


# step 1 -------------------------------------------------------------------


def reader_begin(params: Params, rng: Rng) -> tuple[Query, int]:
    with metering.computing("reader", "alpha"):
        alpha = rng.residue(params.q)
    return Query(alpha), alpha


# step 2 -------------------------------------------------------------------


def tag_commit(cred_t: Credential, msg: Query, rng: Rng) -> tuple[TagCommit, TagSession]:
    _require_role(cred_t, Role.TAG)
    pr = cred_t.params
    alpha = msg.alpha
    with metering.computing("tag", "u_t"):
        u_t = rng.zq_vector(pr.m, pr.q)
    with metering.computing("tag", "x1"):
        x1 = rng.binary_vector(pr.m, pr.q)
    with metering.computing("tag", "beta"):
        beta = perm_apply(cred_t.perm, vec_add(u_t, scalar_mul(alpha, cred_t.x)))
    with metering.computing("tag", "c1"):
        c1 = perm_apply(cred_t.perm, vec_add(cred_t.x, x1))
    with metering.computing("tag", "c2"):
        au = mat_vec_mul(cred_t.a, u_t)
        c2 = h1(c1, au, l=pr.l)
    with metering.computing("tag", "c3"):
        c3 = vec_add(_padded(au, pr), cred_t.x)
    return TagCommit(beta=beta, c1=c1, c3=c3, c2=c2), TagSession(u_t, x1, alpha, pr.l)


# step 3 -------------------------------------------------------------------


def reader_commit(
    cred_r: Credential, query_alpha: int, tc: TagCommit, rng: Rng
) -> tuple[ReaderCommit, ReaderSession]:
    _require_role(cred_r, Role.READER)
    pr = cred_r.params
    with metering.computing("reader", "gamma"):
        gamma = rng.residue(pr.q)
    with metering.computing("reader", "u_r"):
        u_r = rng.zq_vector(pr.m, pr.q)
    with metering.computing("reader", "x2"):
        x2 = rng.binary_vector(pr.m, pr.q)
    with metering.computing("reader", "delta"):
        delta = perm_apply(cred_r.perm, vec_add(u_r, scalar_mul(gamma, cred_r.x)))
    with metering.computing("reader", "c6"):
        c6 = perm_apply(cred_r.perm, vec_add(cred_r.x, x2))
    with metering.computing("reader", "c7"):
        c7 = h1(tc.c1, cred_r.x, l=pr.l)
    with metering.computing("reader", "c8"):
        c8 = vec_add(_padded(mat_vec_mul(cred_r.a, u_r), pr), cred_r.x)
    rc = ReaderCommit(
        alpha=query_alpha,
        gamma=gamma,
        beta=tc.beta,
        c1=tc.c1,
        c3=tc.c3,
        delta=delta,
        c6=c6,
        c8=c8,
        c2=tc.c2,
        c7=c7,
    )
    return rc, ReaderSession(gamma, u_r, x2, query_alpha, pr.l)


# step 4 -------------------------------------------------------------------


def _scan(records, attempt, role: str):
    """Trial-verify records in order; return (record, opened values) or None.

    With metering active, the winning trial's operations are booked
    normally and the losing trials go to ``scan_overhead``.
    """
    counter = metering.active_counter()
    tried = 0
    found = None
    for rec in records:
        tried += 1
        with metering.trial() as scratch:
            opened = attempt(rec)
        if opened is not None:
            if counter is not None:
                counter.merge(scratch)
            found = (rec, opened)
            break
        if counter is not None:
            counter.scan_overhead += sum(scratch.by_value.values())
    if counter is not None:
        counter.records_tried[role] = tried
    return found


def server_process_commit(
    registry: ServerRegistry, rc: ReaderCommit, rng: Rng
) -> tuple[ServerChallenge, ServerSession]:
    pr = registry.params
    if not registry.readers:
        raise AuthenticationFailed(FailureReason.UNKNOWN_DEVICE, "no readers registered")
    if not registry.tags:
        raise AuthenticationFailed(FailureReason.UNKNOWN_DEVICE, "no tags registered")

    def open_reader(rec):
        with metering.computing("server", "c9"):
            c9 = vec_sub(mat_vec_mul(rec.a_perm_inv, rc.delta), scalar_mul(rc.gamma, rec.y))
        with metering.computing("server", "c10"):
            c10 = vec_sub(rc.c8, _padded(c9, pr))
        with metering.computing("server", "c7"):
            digest_ok = h1(rc.c1, c10, l=pr.l) == rc.c7
        return (c9, c10) if digest_ok and c10 == rec.x else None

    found = _scan(registry.readers, open_reader, "reader")
    if found is None:
        raise AuthenticationFailed(FailureReason.READER_REJECTED, "no reader record opens c7")
    reader_rec, (c9, c10) = found

    def open_tag(rec):
        with metering.computing("server", "c4"):
            c4 = vec_sub(mat_vec_mul(rec.a_perm_inv, rc.beta), scalar_mul(rc.alpha, rec.y))
        with metering.computing("server", "c5"):
            c5 = vec_sub(rc.c3, _padded(c4, pr))
        with metering.computing("server", "c2"):
            digest_ok = h1(rc.c1, c4, l=pr.l) == rc.c2
        return (c4, c5) if digest_ok and c5 == rec.x else None

    found = _scan(registry.tags, open_tag, "tag")
    if found is None:
        raise AuthenticationFailed(FailureReason.TAG_REJECTED, "no tag record opens c2")
    tag_rec, (c4, c5) = found

    with metering.computing("server", "x_s"):
        x_s = rng.binary_vector(pr.m, pr.q)
    with metering.computing("server", "c11"):
        x2_expected = vec_sub(perm_apply(reader_rec.perm_inv, rc.c6), c10)
        c11 = perm_apply(reader_rec.perm, vec_add(x_s, x2_expected))
    sess = ServerSession(
        x_s=x_s,
        x2_expected=x2_expected,
        tag_handle=tag_rec.device_handle,
        reader_handle=reader_rec.device_handle,
        alpha=rc.alpha,
        gamma=rc.gamma,
        beta=rc.beta,
        c1=rc.c1,
        delta=rc.delta,
        c6=rc.c6,
        c4=c4,
        c5=c5,
        c9=c9,
        c10=c10,
        c11=c11,
    )
    return ServerChallenge(c11), sess


# step 5 -------------------------------------------------------------------


def reader_open_challenge(cred_r: Credential, sess: ReaderSession, ch: ServerChallenge) -> ZqVector:
    """c12 = P_r^-1 c11 - x2 (equals the server's x_s on an honest run)."""
    with metering.computing("reader", "c12"):
        return vec_sub(perm_apply(cred_r.perm_inv, ch.c11), sess.x2)


def reader_prove(cred_r: Credential, sess: ReaderSession, ch: ServerChallenge) -> ReaderProof:
    _require_role(cred_r, Role.READER)
    if sess.state != "committed":
        raise StateError(f"reader session is {sess.state}, cannot prove")
    sess.state = "proved"
    c12 = reader_open_challenge(cred_r, sess, ch)
    with metering.computing("reader", "c13"):
        c13 = h1(c12, sess.x2, l=cred_r.params.l)
    return ReaderProof(c13)


# step 6 -------------------------------------------------------------------


def server_confirm(registry: ServerRegistry, sess: ServerSession, pr_msg: ReaderProof) -> ServerConfirm:
    if sess.consumed:
        raise StateError("server session already consumed")
    sess.consumed = True
    pr = registry.params
    with metering.computing("server", "c13"):
        proof_ok = h1(sess.x_s, sess.x2_expected, l=pr.l) == pr_msg.c13
    if not proof_ok:
        raise AuthenticationFailed(FailureReason.PROOF_REJECTED, "c13 mismatch")
    tag_rec = registry.lookup(Role.TAG, sess.tag_handle)
    reader_rec = registry.lookup(Role.READER, sess.reader_handle)
    with metering.computing("server", "c14"):
        c14 = h1(perm_apply(tag_rec.perm_inv, vec_sub(sess.beta, scalar_mul(sess.alpha, sess.c1))), l=pr.l)
    with metering.computing("server", "c15"):
        c15 = h1(perm_apply(reader_rec.perm_inv, vec_sub(sess.delta, scalar_mul(sess.gamma, sess.c6))), l=pr.l)
    return ServerConfirm(c14=c14, c15=c15)


# steps 7 and 8 ------------------------------------------------------------


def reader_finalize(sess: ReaderSession, sc: ServerConfirm) -> TagConfirm:
    if sess.state != "proved":
        raise StateError(f"reader session is {sess.state}, cannot finalize")
    sess.state = "done"
    with metering.computing("reader", "c15"):
        expected = h1(vec_sub(sess.u_r, scalar_mul(sess.gamma, sess.x2)), l=sess.l)
    if expected != sc.c15:
        raise AuthenticationFailed(FailureReason.SERVER_REJECTED_BY_READER, "c15 mismatch")
    return TagConfirm(sc.c14)


def tag_finalize(sess: TagSession, tc: TagConfirm) -> AuthOutcome:
    if sess.consumed:
        raise StateError("tag session already consumed")
    sess.consumed = True
    with metering.computing("tag", "c14"):
        expected = h1(vec_sub(sess.u_t, scalar_mul(sess.alpha, sess.x1)), l=sess.l)
    if expected != tc.c14:
        raise AuthenticationFailed(FailureReason.SERVER_REJECTED_BY_TAG, "c14 mismatch")
    return AuthOutcome.ok()
