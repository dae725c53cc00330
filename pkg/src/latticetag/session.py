"""In-process transport: two channels, three role endpoints, one driver.

Messages travel as wire frames.  The tag and reader share the
``tag-reader`` channel; reader and server share ``reader-server``.  An
optional adversary sees every frame as it enters a channel and decides
what gets delivered (see :mod:`latticetag.harness`).  There is no session
id on the wire, so each run gets fresh channel instances.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from . import protocol, wire
from .credentials import Credential, Params, ServerRegistry
from .errors import DimensionMismatch, Malformed, StateError
from .messages import MsgType
from .protocol import AuthenticationFailed, AuthOutcome, FailureReason
from .zq import Rng

TAG, READER, SERVER = "tag", "reader", "server"
TAG_READER, READER_SERVER = "tag-reader", "reader-server"


def channel_of(src: str, dst: str) -> str:
    if {src, dst} == {TAG, READER}:
        return TAG_READER
    if {src, dst} == {READER, SERVER}:
        return READER_SERVER
    raise ValueError(f"no channel between {src} and {dst}")


@dataclass(frozen=True)
class Packet:
    src: str
    dst: str
    frame: bytes

    @property
    def direction(self) -> str:
        return f"{self.src}->{self.dst}"


@dataclass(frozen=True)
class LogEntry:
    seq: int
    action: str  # "sent", "delivered", "dropped" or "injected"
    packet: Packet


@dataclass
class Channel:
    """Append-only frame log for one link."""

    name: str
    log: list[LogEntry] = field(default_factory=list)

    def record(self, action: str, packet: Packet) -> None:
        self.log.append(LogEntry(len(self.log), action, packet))

    def sent(self) -> list[Packet]:
        return [e.packet for e in self.log if e.action == "sent"]

    def delivered(self) -> list[Packet]:
        return [e.packet for e in self.log if e.action in ("delivered", "injected")]


@dataclass(frozen=True)
class TranscriptEntry:
    channel: str
    direction: str
    msg_type: MsgType
    frame: bytes
    payload_bits: int
    injected: bool = False

    @property
    def size_bytes(self) -> int:
        return len(self.frame)


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def kinds(self) -> list[MsgType]:
        return [e.msg_type for e in self.entries]

    def payload_bits(self, channel: str | None = None) -> int:
        return sum(e.payload_bits for e in self.entries if channel is None or e.channel == channel)

    def frame_bytes(self, channel: str | None = None) -> int:
        return sum(e.size_bytes for e in self.entries if channel is None or e.channel == channel)

    def frames(self) -> list[bytes]:
        return [e.frame for e in self.entries]


# endpoints ----------------------------------------------------------------


class _Endpoint:
    name = ""

    def __init__(self, params: Params):
        self.params = params
        self.events: list[str] = []

    def receive(self, frame: bytes) -> list[Packet]:
        msg = wire.decode(frame, self.params)
        handler = getattr(self, f"on_{msg.TYPE.name.lower()}", None)
        if handler is None:
            raise StateError(f"{self.name} does not accept {msg.TYPE.name}")
        return handler(msg)

    def send(self, dst: str, msg) -> Packet:
        return Packet(self.name, dst, wire.encode(msg, self.params))


class TagEndpoint(_Endpoint):
    name = TAG

    def __init__(self, cred: Credential, rng: Rng):
        super().__init__(cred.params)
        self.cred = cred
        self.rng = rng
        self.session: protocol.TagSession | None = None
        self.outcome: AuthOutcome | None = None

    def on_query(self, msg):
        if self.session is not None:
            raise StateError("tag already answered a query")
        tc, self.session = protocol.tag_commit(self.cred, msg, self.rng)
        self.events.append("step 2: tag commitments sent")
        return [self.send(READER, tc)]

    def on_tag_confirm(self, msg):
        if self.session is None:
            raise StateError("tag has no open session")
        self.outcome = protocol.tag_finalize(self.session, msg)
        self.events.append("step 8: tag accepted c14")
        return []


class ReaderEndpoint(_Endpoint):
    name = READER

    def __init__(self, cred: Credential, rng: Rng):
        super().__init__(cred.params)
        self.cred = cred
        self.rng = rng
        self.alpha: int | None = None
        self.session: protocol.ReaderSession | None = None

    def start(self) -> list[Packet]:
        query, self.alpha = protocol.reader_begin(self.params, self.rng)
        self.events.append("step 1: query sent")
        return [self.send(TAG, query)]

    def on_tag_commit(self, msg):
        if self.alpha is None or self.session is not None:
            raise StateError("reader not waiting for a tag commitment")
        rc, self.session = protocol.reader_commit(self.cred, self.alpha, msg, self.rng)
        self.events.append("step 3: reader commitments sent")
        return [self.send(SERVER, rc)]

    def on_server_challenge(self, msg):
        if self.session is None:
            raise StateError("reader has no open session")
        proof = protocol.reader_prove(self.cred, self.session, msg)
        self.events.append("step 5: reader proof sent")
        return [self.send(SERVER, proof)]

    def on_server_confirm(self, msg):
        if self.session is None:
            raise StateError("reader has no open session")
        tc = protocol.reader_finalize(self.session, msg)
        self.events.append("step 7: reader accepted c15")
        return [self.send(TAG, tc)]


class ServerEndpoint(_Endpoint):
    name = SERVER

    def __init__(self, registry: ServerRegistry, rng: Rng):
        super().__init__(registry.params)
        self.registry = registry
        self.rng = rng
        self.session: protocol.ServerSession | None = None

    def on_reader_commit(self, msg):
        if self.session is not None:
            raise StateError("server already holds a session")
        ch, self.session = protocol.server_process_commit(self.registry, msg, self.rng)
        self.events.append("step 4: reader and tag accepted, challenge sent")
        return [self.send(READER, ch)]

    def on_reader_proof(self, msg):
        if self.session is None:
            raise StateError("server has no open session")
        sc = protocol.server_confirm(self.registry, self.session, msg)
        self.events.append("step 6: proof accepted, confirmations sent")
        return [self.send(READER, sc)]


# driver -------------------------------------------------------------------

# adversary hook: (interception) -> packets to deliver, or None to pass through
Interceptor = Callable[["Interception"], "list[Packet] | None"]


@dataclass
class Interception:
    """What an adversary sees when a frame enters a channel."""

    packet: Packet
    channel: Channel
    params: Params
    history: list[Packet]

    @property
    def msg_type(self) -> MsgType:
        return wire.peek_type(self.packet.frame)

    def decode(self):
        return wire.decode(self.packet.frame, self.params)

    def encode(self, msg) -> bytes:
        return wire.encode(msg, self.params)

    def reply(self, msg, dst: str | None = None, src: str | None = None) -> Packet:
        """Packet carrying ``msg``; defaults to the intercepted direction."""
        return Packet(src or self.packet.src, dst or self.packet.dst, wire.encode(msg, self.params))


@dataclass
class SessionRun:
    outcome: AuthOutcome
    transcript: Transcript
    channels: dict[str, Channel]
    tag: TagEndpoint
    reader: ReaderEndpoint
    server: ServerEndpoint

    @property
    def events(self) -> list[str]:
        """Step events of all roles in protocol order."""
        merged = self.reader.events + self.tag.events + self.server.events
        return sorted(merged, key=lambda e: int(e.split(":")[0].split()[1]))


def run_session(
    registry: ServerRegistry,
    cred_t: Credential,
    cred_r: Credential,
    rng: Rng,
    adversary: Interceptor | None = None,
) -> SessionRun:
    """Drive steps 1-8 over fresh channels, optionally through an adversary."""
    params = registry.params
    tag = TagEndpoint(cred_t, rng.child("tag"))
    reader = ReaderEndpoint(cred_r, rng.child("reader"))
    server = ServerEndpoint(registry, rng.child("server"))
    endpoints = {TAG: tag, READER: reader, SERVER: server}
    channels = {TAG_READER: Channel(TAG_READER), READER_SERVER: Channel(READER_SERVER)}
    transcript = Transcript()
    history: list[Packet] = []
    outcome: AuthOutcome | None = None

    queue = deque(reader.start())
    while queue and outcome is None:
        packet = queue.popleft()
        chan = channels[channel_of(packet.src, packet.dst)]
        chan.record("sent", packet)
        history.append(packet)
        deliveries = [packet]
        injected = False
        if adversary is not None:
            replaced = adversary(Interception(packet, chan, params, history))
            if replaced is not None:
                deliveries = list(replaced)
                injected = True
                if packet not in deliveries:
                    chan.record("dropped", packet)
        for out in deliveries:
            out_chan = channels[channel_of(out.src, out.dst)]
            is_original = out is packet or out == packet
            out_chan.record("delivered" if is_original else "injected", out)
            try:
                mtype = wire.peek_type(out.frame)
                transcript.entries.append(
                    TranscriptEntry(
                        out_chan.name,
                        out.direction,
                        mtype,
                        out.frame,
                        wire.payload_bits(mtype, params),
                        injected and not is_original,
                    )
                )
                queue.extend(endpoints[out.dst].receive(out.frame))
            except AuthenticationFailed as exc:
                outcome = exc.outcome
            except (Malformed, DimensionMismatch, StateError) as exc:
                outcome = AuthOutcome.failed(FailureReason.MALFORMED, str(exc))
            if outcome is None and tag.outcome is not None:
                outcome = tag.outcome
            if outcome is not None:
                break
    if outcome is None:
        outcome = AuthOutcome.failed(FailureReason.INCOMPLETE, "no verdict reached")
    return SessionRun(outcome, transcript, channels, tag, reader, server)


def run_honest_session(
    registry: ServerRegistry, cred_t: Credential, cred_r: Credential, rng: Rng
) -> tuple[AuthOutcome, Transcript]:
    run = run_session(registry, cred_t, cred_r, rng)
    return run.outcome, run.transcript
