"""Dolev-Yao channel attacks as executable, must-fail experiments.

An adversary is a callable installed on both channels.  It sees every
frame as it is sent, plus everything sent before in the run, and returns
the packets that actually get delivered (``None`` passes the frame
through).  Replay scenarios additionally get the frames of one earlier
honest run between the same devices.

A scenario is *blocked* when the run fails with one of the reasons the
scenario expects.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import protocol, wire
from .bitpack import bytes_to_bits, uints_to_bits
from .credentials import Credential, Params, Role, ServerRegistry, generate_credential, register
from .errors import ScriptError
from .messages import (
    MESSAGE_CLASSES,
    MsgType,
    ServerChallenge,
    ServerConfirm,
    TagCommit,
    TagConfirm,
    vector_fields,
    with_field,
)
from .protocol import FAILING_CHECK, AuthOutcome, FailureReason
from .session import (
    READER,
    SERVER,
    TAG,
    Interception,
    Packet,
    SessionRun,
    Transcript,
    run_session,
)
from .zq import Rng, ZqVector

R = FailureReason
# a tampered run must end in a failed check, not merely stall
TAMPER_EXPECTED = frozenset(r for r in FailureReason if r != FailureReason.INCOMPLETE)


@dataclass
class ScenarioContext:
    """Everything an adversary may know before the attacked run starts."""

    params: Params
    registry: ServerRegistry
    rng: Rng
    prior: SessionRun | None = None

    def prior_packet(self, msg_type: MsgType) -> Packet:
        if self.prior is None:
            raise ScriptError("scenario needs a recorded prior run")
        for chan in self.prior.channels.values():
            for pkt in chan.sent():
                if wire.peek_type(pkt.frame) == msg_type:
                    return pkt
        raise ScriptError(f"no {msg_type.name} frame in the recorded run")

    def prior_message(self, msg_type: MsgType):
        return wire.decode(self.prior_packet(msg_type).frame, self.params)


@dataclass(frozen=True)
class AttackScenario:
    name: str
    description: str
    make_adversary: Callable[[ScenarioContext], Callable]
    expected: frozenset
    needs_prior: bool = False
    # optional insider setup: returns a registry to attack (never mutates the input)
    prepare: Callable[[ServerRegistry, Rng], ServerRegistry] | None = None


@dataclass
class Verdict:
    name: str
    attack_blocked: bool
    outcome: AuthOutcome
    transcript: Transcript
    frames_observed: int
    expected: frozenset = field(default_factory=frozenset)

    @property
    def failing_check(self) -> str:
        if self.outcome.success:
            return "none (run succeeded)"
        return FAILING_CHECK[self.outcome.reason]

    def report_line(self) -> str:
        status = "BLOCKED" if self.attack_blocked else "NOT-BLOCKED"
        return (
            f"{self.name}\t{status}\t{self.outcome}\t"
            f"{self.failing_check}\tframes={self.frames_observed}"
        )


# adversary building blocks --------------------------------------------------


def _first_only(msg_type: MsgType, action):
    """Apply ``action`` to the first frame of ``msg_type``; pass the rest."""
    done = []

    def adversary(ix: Interception):
        if done or ix.msg_type != msg_type:
            return None
        done.append(True)
        return action(ix)

    return adversary


def _by_type(actions: dict):
    """Dispatch on message type; unmatched frames pass through."""

    def adversary(ix: Interception):
        act = actions.get(ix.msg_type)
        return None if act is None else act(ix)

    return adversary


@dataclass(frozen=True)
class Tamper:
    """Single-element modification of one field of one message kind.

    For residues (scalars and vector elements) ``shift`` is added mod q to
    element ``index``, so shifts 1..q-1 reach every other value.  For
    digests ``index`` is the bit to flip.
    """

    msg_type: MsgType
    field: str
    index: int
    shift: int = 0

    def label(self) -> str:
        suffix = f"+{self.shift}" if self.shift else " flipped"
        return f"{self.msg_type.name.lower()}.{self.field}[{self.index}]{suffix}"

    def apply(self, msg, q: int):
        kind = dict(msg.FIELDS)[self.field]
        old = getattr(msg, self.field)
        if kind == "scalar":
            new = (old + self.shift) % q
        elif kind == "vector":
            new = old.with_element(self.index, old[self.index] + self.shift)
        else:
            buf = bytearray(old)
            buf[self.index // 8] ^= 0x80 >> (self.index % 8)
            new = bytes(buf)
        if new == old:
            raise ScriptError(f"tamper {self.label()} leaves the field unchanged")
        return with_field(msg, self.field, new)

    def adversary(self):
        return _first_only(
            self.msg_type, lambda ix: [ix.reply(self.apply(ix.decode(), ix.params.q))]
        )


def field_kinds(msg_type: MsgType) -> list[tuple[str, str]]:
    return list(MESSAGE_CLASSES[msg_type].FIELDS)


def exhaustive_tampers(params: Params, msg_types: Iterable[MsgType] = tuple(MsgType)) -> list[Tamper]:
    """Every single-element change of every field (all residues, all digest bits)."""
    out = []
    for mt in msg_types:
        for name, kind in field_kinds(mt):
            if kind == "digest":
                out.extend(Tamper(mt, name, bit) for bit in range(params.l))
                continue
            positions = range(1) if kind == "scalar" else range(params.m)
            for pos in positions:
                out.extend(Tamper(mt, name, pos, shift) for shift in range(1, params.q))
    return out


def random_tamper(params: Params, rng: Rng, msg_type: MsgType, name: str | None = None) -> Tamper:
    fields_ = field_kinds(msg_type)
    if name is None:
        name, kind = fields_[rng.integers(0, len(fields_))]
    else:
        kind = dict(fields_)[name]
    if kind == "digest":
        return Tamper(msg_type, name, rng.integers(0, params.l))
    index = 0 if kind == "scalar" else rng.integers(0, params.m)
    return Tamper(msg_type, name, index, rng.integers(1, params.q))


def sampled_tampers(params: Params, rng: Rng, per_message: int) -> list[Tamper]:
    """``per_message`` random single-element changes for each message kind."""
    return [random_tamper(params, rng, mt) for mt in MsgType for _ in range(per_message)]


def run_tamper(tamper: Tamper, registry, cred_t, cred_r, rng: Rng) -> Verdict:
    run = run_session(registry, cred_t, cred_r, rng, tamper.adversary())
    return _verdict(f"mitm:{tamper.label()}", run, TAMPER_EXPECTED)


def tamper_sweep(
    registry: ServerRegistry,
    cred_t: Credential,
    cred_r: Credential,
    rng: Rng,
    tampers: Iterable[Tamper],
) -> list[Verdict]:
    return [run_tamper(t, registry, cred_t, cred_r, rng.child(f"tamper/{i}")) for i, t in enumerate(tampers)]


# scenario catalog ---------------------------------------------------------


def _mitm_field(msg_type: MsgType, name: str) -> AttackScenario:
    def make(ctx: ScenarioContext):
        return random_tamper(ctx.params, ctx.rng, msg_type, name).adversary()

    return AttackScenario(
        name=f"mitm-{msg_type.name.lower().replace('_', '')}-{name}",
        description=f"change one element of {name} in {msg_type.name} in transit",
        make_adversary=make,
        expected=TAMPER_EXPECTED,
    )


def _replay_tag(ctx: ScenarioContext):
    """Swap in the recorded tag commitment and the recorded alpha.

    Rewriting alpha gets the stale commitment past the server's step 4.2
    check, so the replay can only be caught by the genuine tag at step 8.
    """
    old_tc = ctx.prior_packet(MsgType.TAG_COMMIT)
    old_alpha = ctx.prior_message(MsgType.QUERY).alpha
    return _by_type(
        {
            MsgType.TAG_COMMIT: lambda ix: [Packet(ix.packet.src, ix.packet.dst, old_tc.frame)],
            MsgType.READER_COMMIT: lambda ix: [ix.reply(with_field(ix.decode(), "alpha", old_alpha))],
        }
    )


def _replay_tag_naive(ctx: ScenarioContext):
    old_tc = ctx.prior_packet(MsgType.TAG_COMMIT)
    return _by_type({MsgType.TAG_COMMIT: lambda ix: [Packet(ix.packet.src, ix.packet.dst, old_tc.frame)]})


def _replay_reader(ctx: ScenarioContext):
    """Swap in the recorded (gamma, delta, c8) and keep the live c6, c7.

    This is the largest recorded subset that still opens at step 4.1, so
    only the reader's step 7 check can catch it.
    """
    old = ctx.prior_message(MsgType.READER_COMMIT)

    def act(ix):
        rc = ix.decode()
        forged = dataclasses.replace(rc, gamma=old.gamma, delta=old.delta, c8=old.c8)
        return [ix.reply(forged)]

    return _by_type({MsgType.READER_COMMIT: act})


def _replay_reader_naive(ctx: ScenarioContext):
    old = ctx.prior_message(MsgType.READER_COMMIT)

    def act(ix):
        rc = ix.decode()
        forged = dataclasses.replace(
            rc, gamma=old.gamma, delta=old.delta, c6=old.c6, c7=old.c7, c8=old.c8
        )
        return [ix.reply(forged)]

    return _by_type({MsgType.READER_COMMIT: act})


def _replay_reader_full(ctx: ScenarioContext):
    old = ctx.prior_packet(MsgType.READER_COMMIT)
    return _by_type({MsgType.READER_COMMIT: lambda ix: [Packet(ix.packet.src, ix.packet.dst, old.frame)]})


def _rogue_credential(ctx: ScenarioContext, role: Role) -> Credential:
    return generate_credential(ctx.params, role, ctx.rng.child(f"rogue-{role.name}"))


def _impersonate_tag_with(cred: Credential, ctx: ScenarioContext):
    """Answer the reader's query with commitments made from ``cred``."""

    def act(ix):
        query = next(
            wire.decode(p.frame, ix.params) for p in ix.history if wire.peek_type(p.frame) == MsgType.QUERY
        )
        tc, _ = protocol.tag_commit(cred, query, ctx.rng.child("imp-tag"))
        return [ix.reply(tc)]

    return _by_type({MsgType.TAG_COMMIT: act})


def _impersonate_tag(ctx: ScenarioContext):
    return _impersonate_tag_with(_rogue_credential(ctx, Role.TAG), ctx)


def _impersonate_tag_insider(ctx: ScenarioContext):
    # a registered reader reuses its own key material in the tag role
    insider = ctx.registry.readers[-1].credential
    return _impersonate_tag_with(dataclasses.replace(insider, role=Role.TAG), ctx)


def _add_insider_reader(registry: ServerRegistry, rng: Rng) -> ServerRegistry:
    copy = ServerRegistry(registry.params, list(registry.tags), list(registry.readers))
    register(copy, generate_credential(registry.params, Role.READER, rng.child("insider")))
    return copy


def _impersonate_reader(ctx: ScenarioContext):
    rogue = _rogue_credential(ctx, Role.READER)

    def act(ix):
        rc = ix.decode()
        tc_fields = {k: getattr(rc, k) for k in ("beta", "c1", "c3", "c2")}
        forged, _ = protocol.reader_commit(rogue, rc.alpha, TagCommit(**tc_fields), ctx.rng.child("imp-reader"))
        return [ix.reply(forged)]

    return _by_type({MsgType.READER_COMMIT: act})


def _random_digest(rng: Rng, params: Params) -> bytes:
    return bytes(np.packbits(bytes_to_bits(rng.randbytes(params.digest_bytes), params.l)))


def _impersonate_server(ctx: ScenarioContext):
    """Cut the server off and answer the reader with fresh random values."""
    p = ctx.params
    return _by_type(
        {
            MsgType.READER_COMMIT: lambda ix: [
                ix.reply(ServerChallenge(ctx.rng.zq_vector(p.m, p.q)), src=SERVER, dst=READER)
            ],
            MsgType.READER_PROOF: lambda ix: [
                ix.reply(
                    ServerConfirm(c14=_random_digest(ctx.rng, p), c15=_random_digest(ctx.rng, p)),
                    src=SERVER,
                    dst=READER,
                )
            ],
        }
    )


def _reflect_tag(ctx: ScenarioContext):
    """Bounce the tag's own digest c2 back to it as the confirmation c14."""

    def act(ix):
        tc = ix.decode()
        return [ix.reply(TagConfirm(tc.c2), src=READER, dst=TAG)]

    return _by_type({MsgType.TAG_COMMIT: act})


def _reflect_tag_frame(ctx: ScenarioContext):
    return _by_type(
        {MsgType.TAG_COMMIT: lambda ix: [Packet(READER, TAG, ix.packet.frame)]}
    )


def _reflect_reader(ctx: ScenarioContext):
    """Answer the reader with its own values: c6 as c11, then (c2, c7) as (c14, c15)."""
    seen = {}

    def on_commit(ix):
        rc = ix.decode()
        seen["rc"] = rc
        return [ix.reply(ServerChallenge(rc.c6), src=SERVER, dst=READER)]

    def on_proof(ix):
        rc = seen["rc"]
        return [ix.reply(ServerConfirm(c14=rc.c2, c15=rc.c7), src=SERVER, dst=READER)]

    return _by_type({MsgType.READER_COMMIT: on_commit, MsgType.READER_PROOF: on_proof})


def passthrough() -> AttackScenario:
    """Empty script: the harness must be transparent."""
    return AttackScenario("passthrough", "no interference", lambda ctx: (lambda ix: None), frozenset())


def builtin_scenarios() -> list[AttackScenario]:
    mitm = [_mitm_field(mt, name) for mt in MsgType for name, _ in field_kinds(mt)]
    return mitm + [
        AttackScenario(
            "replay-tag",
            "replay a recorded tag commitment and its alpha to the reader and server",
            _replay_tag,
            frozenset({R.SERVER_REJECTED_BY_TAG}),
            needs_prior=True,
        ),
        AttackScenario(
            "replay-tag-naive",
            "replay a recorded tag commitment under the reader's fresh alpha",
            _replay_tag_naive,
            # if the fresh alpha happens to equal the recorded one, step 8 catches it
            frozenset({R.TAG_REJECTED, R.SERVER_REJECTED_BY_TAG}),
            needs_prior=True,
        ),
        AttackScenario(
            "replay-reader",
            "replay recorded (gamma, delta, c8) to the server",
            _replay_reader,
            frozenset({R.SERVER_REJECTED_BY_READER}),
            needs_prior=True,
        ),
        AttackScenario(
            "replay-reader-naive",
            "replay recorded (gamma, delta, c6, c7, c8) to the server",
            _replay_reader_naive,
            # a repeated c1 (likely only at tiny m) lets it past 4.1
            frozenset({R.READER_REJECTED, R.PROOF_REJECTED, R.SERVER_REJECTED_BY_READER}),
            needs_prior=True,
        ),
        AttackScenario(
            "replay-reader-full",
            "replay a whole recorded reader commitment to the server",
            _replay_reader_full,
            frozenset({R.PROOF_REJECTED}),
            needs_prior=True,
        ),
        AttackScenario(
            "impersonate-tag",
            "answer the query with commitments from an unregistered tag key",
            _impersonate_tag,
            frozenset({R.TAG_REJECTED}),
            needs_prior=True,
        ),
        AttackScenario(
            "impersonate-tag-insider",
            "a registered reader answers the query using its reader key as a tag",
            _impersonate_tag_insider,
            frozenset({R.TAG_REJECTED}),
            prepare=_add_insider_reader,
        ),
        AttackScenario(
            "impersonate-reader",
            "forward the tag's values under an unregistered reader key",
            _impersonate_reader,
            frozenset({R.READER_REJECTED}),
            needs_prior=True,
        ),
        AttackScenario(
            "impersonate-server",
            "answer the reader with random c11, c14, c15",
            _impersonate_server,
            frozenset({R.SERVER_REJECTED_BY_READER, R.SERVER_REJECTED_BY_TAG}),
        ),
        AttackScenario(
            "reflect-tag",
            "send the tag's c2 back to it as c14",
            _reflect_tag,
            frozenset({R.SERVER_REJECTED_BY_TAG}),
        ),
        AttackScenario(
            "reflect-tag-frame",
            "echo the tag's commitment frame back to the tag",
            _reflect_tag_frame,
            frozenset({R.MALFORMED}),
        ),
        AttackScenario(
            "reflect-reader",
            "answer the reader with its own c6 as c11 and (c2, c7) as (c14, c15)",
            _reflect_reader,
            frozenset({R.SERVER_REJECTED_BY_READER}),
        ),
    ]


MITM_GROUP = "mitm-tamper-each-field"


def find_scenarios(name: str) -> list[AttackScenario]:
    catalog = builtin_scenarios()
    if name == "all":
        return catalog
    if name == MITM_GROUP:
        return [s for s in catalog if s.name.startswith("mitm-")]
    found = [s for s in catalog if s.name == name]
    if not found:
        raise KeyError(name)
    return found


def _verdict(name: str, run: SessionRun, expected: frozenset) -> Verdict:
    blocked = (not run.outcome.success) and run.outcome.reason in expected
    observed = sum(len(c.sent()) for c in run.channels.values())
    return Verdict(name, blocked, run.outcome, run.transcript, observed, expected)


def run_scenario(
    scenario: AttackScenario,
    registry: ServerRegistry,
    creds: tuple[Credential, Credential],
    rng: Rng,
) -> Verdict:
    cred_t, cred_r = creds
    if scenario.prepare is not None:
        registry = scenario.prepare(registry, rng.child("prepare"))
    prior = run_session(registry, cred_t, cred_r, rng.child("prior")) if scenario.needs_prior else None
    ctx = ScenarioContext(registry.params, registry, rng.child("adversary"), prior)
    adversary = scenario.make_adversary(ctx)
    run = run_session(registry, cred_t, cred_r, rng.child("attack"), adversary)
    return _verdict(scenario.name, run, scenario.expected)


def run_scenarios(scenarios, registry, creds, rng) -> list[Verdict]:
    return [run_scenario(s, registry, creds, rng.child(s.name)) for s in scenarios]


def format_report(verdicts: list[Verdict]) -> str:
    header = "name\tverdict\toutcome\tfailing_check\tframes"
    return "\n".join([header] + [v.report_line() for v in verdicts]) + "\n"


# anonymity ----------------------------------------------------------------


def identity_bit_pattern(x: ZqVector, params: Params) -> bytes:
    """Wire bit pattern of ``x`` as a vector field, one byte per bit."""
    return uints_to_bits(x.elems, params.residue_bits).tobytes()


@dataclass
class AnonymityReport:
    sessions: int
    all_succeeded: bool
    identity_matches: int
    repeated_vector_fields: int
    distinct_c1: int

    @property
    def ok(self) -> bool:
        return (
            self.all_succeeded
            and self.identity_matches == 0
            and self.repeated_vector_fields == 0
            and self.distinct_c1 == self.sessions
        )


def anonymity_probe(
    registry: ServerRegistry,
    creds: tuple[Credential, Credential],
    sessions: int,
    rng: Rng,
) -> AnonymityReport:
    """Run ``sessions`` honest runs and look for identity leaks and repeats.

    (a) the bit pattern of each identity vector, as it would be packed in a
    vector field, is searched for at every bit offset of every frame;
    (b) every vector-valued field is compared across runs.
    """
    if sessions < 2:
        raise ValueError("need at least two sessions")
    params = registry.params
    cred_t, cred_r = creds
    needles = [identity_bit_pattern(c.x, params) for c in (cred_t, cred_r)]
    matches = 0
    owner: dict[bytes, int] = {}
    repeated = 0
    c1_seen = set()
    all_ok = True
    for i in range(sessions):
        run = run_session(registry, cred_t, cred_r, rng.child(f"anon/{i}"))
        all_ok &= run.outcome.success
        this_session = set()
        for entry in run.transcript:
            bits = bytes_to_bits(entry.frame[wire.HEADER_BYTES :], entry.payload_bits).tobytes()
            matches += sum(bits.find(nd) >= 0 for nd in needles)
            msg = wire.decode(entry.frame, params)
            for name, vec in vector_fields(msg).items():
                key = hashlib.sha256(vec.elems.tobytes()).digest()
                this_session.add(key)
                if name == "c1" and entry.msg_type == MsgType.TAG_COMMIT:
                    c1_seen.add(key)
        for key in this_session:
            if key in owner:
                repeated += 1
            else:
                owner[key] = i
    return AnonymityReport(sessions, all_ok, matches, repeated, len(c1_seen))
