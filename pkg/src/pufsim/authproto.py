"""Remote authentication with enrolled challenge/secret pairs.

A trusted party enrolls ``(C, S)`` pairs, with ``S`` the extracted secret.
In the field the verifier sends an unused challenge and a fresh nonce, the
prover answers ``HMAC-SHA-256(key=S, msg=nonce)``, and the verifier
compares in constant time.  Every challenge is issued at most once.

Wire frames are ``type (1 byte) || payload length (4 bytes, big-endian) ||
payload``:

============  =====  =============================================================
ChallengeReq  0x01   empty
Challenge     0x02   bit length (2 bytes, big-endian) || challenge bytes || nonce (16)
Response      0x03   MAC (32 bytes)
Verdict       0x04   0x01 accept / 0x00 reject
Error         0x7F   UTF-8 reason
============  =====  =============================================================
"""
from __future__ import annotations

import enum
import hmac
import logging
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .bits import BitString
from .core import PufDevice
from .errors import (ChallengeNotForeseen, MalformedFrame, NotEnoughChallenges, NotIssued, ProtocolError,
                     PufError, StoreExhausted, Timeout, UnknownChallenge)
from .extractor import IDENTITY, NONCE_BYTES, ExtractorParams, pf3_respond
from .rng import Rng

log = logging.getLogger(__name__)

MAX_PAYLOAD = 64 * 1024
MAC_BYTES = 32
DEFAULT_TIMEOUT = 5.0
STORE_MAGIC = "PUFCRP1"


class MsgType(enum.IntEnum):
    CHALLENGE_REQUEST = 0x01
    CHALLENGE = 0x02
    RESPONSE = 0x03
    VERDICT = 0x04
    ERROR = 0x7F


# ---------------------------------------------------------------- CRP store

@dataclass
class CrpRecord:
    challenge: BitString
    secret: BitString
    used: bool = False


@dataclass
class CrpStore:
    device_id: bytes
    l: int
    l_S: int
    records: list[CrpRecord] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)

    def __post_init__(self):
        if len(self.device_id) != 16:
            raise ValueError("device_id must be 16 bytes")
        self._lock = threading.Lock()
        self._index = {}
        for i, rec in enumerate(self.records):
            if rec.challenge in self._index:
                raise ValueError(f"duplicate challenge {rec.challenge!r} in store")
            self._index[rec.challenge] = i
        self._pending: dict[BitString, bytes] = {}
        self._free = [i for i, r in enumerate(self.records) if not r.used]

    def __len__(self):
        return len(self.records)

    @property
    def unused(self) -> int:
        return len(self._free)

    def add(self, challenge: BitString, secret: BitString):
        if challenge in self._index:
            raise ValueError(f"duplicate challenge {challenge!r}")
        self._index[challenge] = len(self.records)
        self._free.append(len(self.records))
        self.records.append(CrpRecord(challenge, secret))

    def lookup(self, challenge: BitString) -> CrpRecord:
        try:
            return self.records[self._index[challenge]]
        except KeyError:
            raise UnknownChallenge(f"{challenge!r} is not enrolled") from None

    def save(self, path: "str | Path") -> None:
        lines = [f"{STORE_MAGIC} {self.device_id.hex()} {self.l} {self.l_S}"]
        lines += [f"{r.challenge.to_hex()} {r.secret.to_hex()} {int(r.used)}" for r in self.records]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: "str | Path") -> CrpStore:
        text = Path(path).read_text().splitlines()
        if not text:
            raise ValueError(f"{path}: empty store file")
        head = text[0].split()
        if len(head) != 4 or head[0] != STORE_MAGIC:
            raise ValueError(f"{path}: bad header {text[0]!r}")
        l, l_S = int(head[2]), int(head[3])
        records = []
        for lineno, line in enumerate(text[1:], 2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3 or parts[2] not in ("0", "1"):
                raise ValueError(f"{path}:{lineno}: bad record {line!r}")
            records.append(CrpRecord(BitString.from_hex(parts[0], l), BitString.from_hex(parts[1], l_S),
                                     parts[2] == "1"))
        return cls(bytes.fromhex(head[1]), l, l_S, records, created_at=0.0)


def enroll(device: PufDevice, n_pairs: int, rng: Rng, extractor: ExtractorParams = IDENTITY,
           device_id: bytes | None = None) -> CrpStore:
    """Read ``n_pairs`` distinct foreseen challenges through the public API."""
    if n_pairs > device.foreseen.size:
        raise NotEnoughChallenges(f"{n_pairs} pairs requested, device foresees {device.foreseen.size}")
    challenges = device.foreseen.sample_distinct(rng.fork("enroll"), n_pairs)
    first = extractor(device.evaluate(challenges[0])) if challenges else None
    store = CrpStore(device_id or rng.fork("device-id").bytes(16), device.challenge_length,
                     len(first) if first is not None else 0)
    for i, c in enumerate(challenges):
        store.add(c, first if i == 0 else extractor(device.evaluate(c)))
    return store


def issue_challenge(store: CrpStore, rng: Rng) -> tuple[BitString, bytes]:
    """Pick an unused record uniformly, mark it used and pair it with a fresh nonce."""
    with store._lock:
        free = store._free
        if not free:
            raise StoreExhausted("all enrolled challenges have been used")
        j = rng.below(len(free))
        free[j], free[-1] = free[-1], free[j]
        rec = store.records[free.pop()]
        rec.used = True
        nonce = rng.bytes(NONCE_BYTES)
        store._pending[rec.challenge] = nonce
    return rec.challenge, nonce


def prover_respond(device: PufDevice, challenge: BitString, nonce: bytes,
                   extractor: ExtractorParams = IDENTITY) -> BitString:
    return pf3_respond(extractor(device.evaluate(challenge)), nonce)


def verifier_check(store: CrpStore, challenge: BitString, nonce: bytes, response: BitString) -> bool:
    """Accept iff ``response`` is the MAC of ``nonce`` under the stored secret.

    Each issued challenge admits a single check, and only with the nonce it
    was issued with.
    """
    rec = store.lookup(challenge)
    if not rec.used:
        raise NotIssued(f"{challenge!r} has not been issued")
    with store._lock:
        issued = store._pending.pop(challenge, None)
    expected = pf3_respond(rec.secret, nonce).to_bytes()
    ok = hmac.compare_digest(expected, response.to_bytes() if len(response) == 256 else b"")
    return ok and issued is not None and hmac.compare_digest(issued, nonce)


# ---------------------------------------------------------------- framing

def encode_frame(msg_type: int, payload: bytes = b"") -> bytes:
    if len(payload) > MAX_PAYLOAD:
        raise MalformedFrame(f"payload of {len(payload)} bytes exceeds {MAX_PAYLOAD}")
    return struct.pack(">BI", int(msg_type), len(payload)) + payload


def encode_challenge(challenge: BitString, nonce: bytes) -> bytes:
    if len(nonce) != NONCE_BYTES:
        raise ValueError("nonce must be 16 bytes")
    return struct.pack(">H", len(challenge)) + challenge.to_bytes() + nonce


def decode_challenge(payload: bytes) -> tuple[BitString, bytes]:
    if len(payload) < 2:
        raise MalformedFrame("challenge payload too short")
    (nbits,) = struct.unpack(">H", payload[:2])
    nbytes = (nbits + 7) // 8
    if nbits == 0 or len(payload) != 2 + nbytes + NONCE_BYTES:
        raise MalformedFrame("challenge payload length does not match its bit length")
    try:
        c = BitString.from_bytes(payload[2:2 + nbytes], nbits)
    except ValueError as exc:
        raise MalformedFrame(str(exc)) from exc
    return c, payload[2 + nbytes:]


class Transport:
    """Ordered, reliable byte stream."""

    def send(self, data: bytes) -> None:
        raise NotImplementedError

    def recv_exact(self, n: int, timeout: float) -> bytes:
        raise NotImplementedError

    def close(self) -> None:
        pass


class PipeEnd(Transport):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self._in, self._out = inbox, outbox
        self._buf = bytearray()
        self.closed = False

    def send(self, data: bytes) -> None:
        self._out.put(bytes(data))

    def recv_exact(self, n: int, timeout: float) -> bytes:
        deadline = time.monotonic() + timeout
        while len(self._buf) < n:
            left = deadline - time.monotonic()
            if left <= 0:
                raise Timeout(f"no data within {timeout} s")
            try:
                chunk = self._in.get(timeout=left)
            except queue.Empty:
                raise Timeout(f"no data within {timeout} s") from None
            if chunk is None:
                raise ProtocolError("peer closed the stream")
            self._buf += chunk
        out = bytes(self._buf[:n])
        del self._buf[:n]
        return out

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self._out.put(None)


def pipe() -> tuple[PipeEnd, PipeEnd]:
    """Connected in-memory transport pair."""
    a, b = queue.Queue(), queue.Queue()
    return PipeEnd(a, b), PipeEnd(b, a)


class SocketTransport(Transport):
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def send(self, data: bytes) -> None:
        self.sock.sendall(data)

    def recv_exact(self, n: int, timeout: float) -> bytes:
        self.sock.settimeout(timeout)
        buf = bytearray()
        try:
            while len(buf) < n:
                chunk = self.sock.recv(n - len(buf))
                if not chunk:
                    raise ProtocolError("peer closed the connection")
                buf += chunk
        except socket.timeout:
            raise Timeout(f"no data within {timeout} s") from None
        return bytes(buf)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def send_frame(t: Transport, msg_type: int, payload: bytes = b"") -> None:
    t.send(encode_frame(msg_type, payload))


def read_frame(t: Transport, timeout: float = DEFAULT_TIMEOUT) -> tuple[MsgType, bytes]:
    head = t.recv_exact(5, timeout)
    msg_type, length = struct.unpack(">BI", head)
    try:
        kind = MsgType(msg_type)
    except ValueError:
        raise MalformedFrame(f"unknown frame type 0x{msg_type:02x}") from None
    if length > MAX_PAYLOAD:
        raise MalformedFrame(f"declared payload {length} exceeds {MAX_PAYLOAD}")
    return kind, t.recv_exact(length, timeout)


# ---------------------------------------------------------------- endpoints

@dataclass
class SessionResult:
    accepted: bool
    challenge: BitString | None = None
    error: str | None = None


def _expect(t: Transport, kind: MsgType, timeout: float) -> bytes:
    got, payload = read_frame(t, timeout)
    if got is MsgType.ERROR:
        raise ProtocolError(f"peer error: {payload.decode('utf-8', 'replace')}")
    if got is not kind:
        raise MalformedFrame(f"expected {kind.name}, got {got.name}")
    return payload


def serve(store: CrpStore, transport: Transport, rng: Rng, timeout: float = DEFAULT_TIMEOUT) -> SessionResult:
    """Verifier side of one session.  Closes the transport when done."""
    challenge = None
    try:
        payload = _expect(transport, MsgType.CHALLENGE_REQUEST, timeout)
        if payload:
            raise MalformedFrame("challenge request carries a payload")
        challenge, nonce = issue_challenge(store, rng)
        send_frame(transport, MsgType.CHALLENGE, encode_challenge(challenge, nonce))
        payload = _expect(transport, MsgType.RESPONSE, timeout)
        if len(payload) != MAC_BYTES:
            raise MalformedFrame(f"response must be {MAC_BYTES} bytes, got {len(payload)}")
        ok = verifier_check(store, challenge, nonce, BitString.from_bytes(payload, 8 * MAC_BYTES))
        send_frame(transport, MsgType.VERDICT, b"\x01" if ok else b"\x00")
        return SessionResult(ok, challenge)
    except (PufError, OSError) as exc:
        log.debug("verifier session failed: %s", exc)
        try:
            send_frame(transport, MsgType.ERROR, str(exc).encode()[:MAX_PAYLOAD])
        except OSError:
            pass
        return SessionResult(False, challenge, str(exc))
    finally:
        transport.close()


def authenticate(device: PufDevice, transport: Transport, extractor: ExtractorParams = IDENTITY,
                 timeout: float = DEFAULT_TIMEOUT) -> SessionResult:
    """Prover side of one session; returns the verifier's verdict."""
    challenge = None
    try:
        send_frame(transport, MsgType.CHALLENGE_REQUEST)
        challenge, nonce = decode_challenge(_expect(transport, MsgType.CHALLENGE, timeout))
        try:
            r = prover_respond(device, challenge, nonce, extractor)
        except (ChallengeNotForeseen, PufError) as exc:
            msg = f"cannot answer challenge: {exc}"
            send_frame(transport, MsgType.ERROR, msg.encode())
            return SessionResult(False, challenge, msg)
        send_frame(transport, MsgType.RESPONSE, r.to_bytes())
        payload = _expect(transport, MsgType.VERDICT, timeout)
        if payload not in (b"\x00", b"\x01"):
            raise MalformedFrame("bad verdict payload")
        return SessionResult(payload == b"\x01", challenge)
    except (PufError, OSError) as exc:
        log.debug("prover session failed: %s", exc)
        return SessionResult(False, challenge, str(exc))
    finally:
        transport.close()


def run_session(store: CrpStore, device: PufDevice, rng: Rng, extractor: ExtractorParams = IDENTITY,
                timeout: float = DEFAULT_TIMEOUT) -> tuple[SessionResult, SessionResult]:
    """One verifier/prover session over an in-memory pipe (verifier in a thread)."""
    v_end, p_end = pipe()
    out = {}
    th = threading.Thread(target=lambda: out.setdefault("v", serve(store, v_end, rng, timeout)))
    th.start()
    prover = authenticate(device, p_end, extractor, timeout)
    th.join()
    return out["v"], prover


def parse_address(address: str) -> tuple[str, int] | None:
    """``host:port`` -> tuple; ``pipe:`` -> None (in-memory)."""
    if address == "pipe:" or address.startswith("pipe:"):
        return None
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bad address {address!r}; expected host:port or pipe:")
    return host or "127.0.0.1", int(port)
