import socket
import struct
import threading

import pytest

from pufsim.authproto import (CrpStore, MsgType, SocketTransport, authenticate, decode_challenge, encode_challenge,
                              encode_frame, enroll, issue_challenge, parse_address, pipe, prover_respond,
                              read_frame, run_session, send_frame, serve, verifier_check)
from pufsim.bits import BitString
from pufsim.errors import MalformedFrame, NotEnoughChallenges, NotIssued, StoreExhausted, UnknownChallenge
from pufsim.extractor import ExtractorParams, block_recovery_probability, pf3_respond
from pufsim.families import KeyedHashPuf, QuantumEurPuf, TableMrtPuf
from pufsim.rng import Rng

from conftest import within_sigma


@pytest.fixture
def table():
    return TableMrtPuf(100, 16, 64, seed=61)


# ---------------------------------------------------------------- enrollment and issuing

def test_enroll_whole_table(table, rng):
    store = enroll(table, 100, rng)
    assert len(store) == 100 and store.unused == 100
    assert len({r.challenge for r in store.records}) == 100
    for rec in store.records[:10]:
        assert table.evaluate(rec.challenge) == rec.secret


def test_enroll_too_many(table, rng):
    with pytest.raises(NotEnoughChallenges):
        enroll(table, 101, rng)


def test_issue_until_exhausted(table, rng):
    store = enroll(table, 1, rng)
    c, nonce = issue_challenge(store, rng)
    assert c == store.records[0].challenge and len(nonce) == 16
    with pytest.raises(StoreExhausted):
        issue_challenge(store, rng)


def test_every_record_issued_once():
    dev = KeyedHashPuf(32, 64, seed=62)
    store = enroll(dev, 10_000, Rng(1))
    rng = Rng(2)
    issued = [issue_challenge(store, rng)[0] for _ in range(10_000)]
    assert len(set(issued)) == 10_000 and store.unused == 0


def test_concurrent_issuing_is_atomic():
    dev = KeyedHashPuf(32, 64, seed=63)
    store = enroll(dev, 4000, Rng(1))
    results, barrier = [[] for _ in range(8)], threading.Barrier(8)

    def worker(i):
        rng = Rng(100 + i)
        barrier.wait()
        for _ in range(500):
            results[i].append(issue_challenge(store, rng)[0])

    threads = [threading.Thread(target=worker, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    flat = [c for r in results for c in r]
    assert len(flat) == 4000 and len(set(flat)) == 4000


# ---------------------------------------------------------------- verification

def test_verifier_accepts_and_rejects(table, rng):
    store = enroll(table, 10, rng)
    c, nonce = issue_challenge(store, rng)
    r = prover_respond(table, c, nonce)
    assert verifier_check(store, c, nonce, r)

    c, nonce = issue_challenge(store, rng)
    assert not verifier_check(store, c, nonce, prover_respond(table, c, nonce).flip(17))

    c, nonce = issue_challenge(store, rng)
    other = next(rec.challenge for rec in store.records if rec.challenge != c)
    assert not verifier_check(store, c, nonce, pf3_respond(table.evaluate(other), nonce))


def test_replay_is_rejected(table, rng):
    store = enroll(table, 10, rng)
    c, nonce = issue_challenge(store, rng)
    r = prover_respond(table, c, nonce)
    assert verifier_check(store, c, nonce, r)
    assert not verifier_check(store, c, nonce, r)


def test_stale_nonce_is_rejected(table, rng):
    store = enroll(table, 10, rng)
    c, nonce = issue_challenge(store, rng)
    old = rng.bytes(16)
    assert not verifier_check(store, c, old, prover_respond(table, c, old))


def test_unissued_and_unknown(table, rng):
    store = enroll(table, 10, rng)
    with pytest.raises(NotIssued):
        verifier_check(store, store.records[0].challenge, bytes(16), BitString.zeros(256))
    with pytest.raises(UnknownChallenge):
        store.lookup(BitString.zeros(3))


# ---------------------------------------------------------------- framing

def test_frame_layout():
    assert encode_frame(MsgType.CHALLENGE_REQUEST) == b"\x01\x00\x00\x00\x00"
    payload = encode_challenge(BitString("101"), bytes(range(16)))
    assert payload == b"\x00\x03\xa0" + bytes(range(16))
    assert decode_challenge(payload) == (BitString("101"), bytes(range(16)))
    assert encode_frame(MsgType.VERDICT, b"\x01") == b"\x04\x00\x00\x00\x01\x01"


@pytest.mark.parametrize("bad", [b"\x00", b"\x00\x03\xa0" + bytes(15), b"\x00\x03\xa1" + bytes(16),
                                 b"\x00\x00" + bytes(16)])
def test_malformed_challenge_payloads(bad):
    with pytest.raises(MalformedFrame):
        decode_challenge(bad)


def test_oversized_and_unknown_frames():
    with pytest.raises(MalformedFrame):
        encode_frame(MsgType.RESPONSE, bytes(64 * 1024 + 1))
    a, b = pipe()
    a.send(b"\x09\x00\x00\x00\x00")
    with pytest.raises(MalformedFrame):
        read_frame(b, 1.0)
    a.send(struct.pack(">BI", 3, 64 * 1024 + 1))
    with pytest.raises(MalformedFrame):
        read_frame(b, 1.0)


def _drive_verifier(store, script):
    """Run the verifier in a thread and feed it raw bytes from ``script(prover_end)``."""
    v_end, p_end = pipe()
    out = {}
    th = threading.Thread(target=lambda: out.setdefault("v", serve(store, v_end, Rng(1), timeout=1.0)))
    th.start()
    frames = script(p_end)
    th.join()
    return out["v"], frames


@pytest.mark.parametrize("response", [
    lambda: encode_frame(MsgType.RESPONSE, bytes(10)),  # short MAC
    lambda: struct.pack(">BI", 3, 32) + bytes(10),  # header promises more than arrives
])
def test_truncated_response_gets_error_frame(table, rng, response):
    store = enroll(table, 5, rng)

    def script(p):
        send_frame(p, MsgType.CHALLENGE_REQUEST)
        got = [read_frame(p, 1.0)]
        p.send(response())
        p.close()
        got.append(read_frame(p, 2.0))
        return got

    result, frames = _drive_verifier(store, script)
    assert not result.accepted and result.error
    assert frames[0][0] is MsgType.CHALLENGE and frames[1][0] is MsgType.ERROR


# ---------------------------------------------------------------- sessions

def test_honest_session(table, rng):
    store = enroll(table, 5, rng)
    v, p = run_session(store, table, rng)
    assert v.accepted and p.accepted and v.challenge == p.challenge


def test_sessions_drain_store(table, rng):
    store = enroll(table, 100, rng)
    results = [run_session(store, table, rng) for _ in range(100)]
    assert all(v.accepted and p.accepted for v, p in results)
    assert len({v.challenge for v, _ in results}) == 100 and store.unused == 0
    v, p = run_session(store, table, rng)
    assert not v.accepted and "used" in v.error and not p.accepted


def test_impostors_rejected():
    dev = KeyedHashPuf(64, 128, seed=64)
    store = enroll(dev, 1000, Rng(1))
    rng = Rng(2)
    for i in range(1000):
        v, _ = run_session(store, KeyedHashPuf(64, 128, seed=1000 + i), rng)
        assert not v.accepted


def test_prover_that_cannot_answer(table, rng):
    store = enroll(table, 5, rng)
    stranger = TableMrtPuf(100, 16, 64, seed=65)
    v, p = run_session(store, stranger, rng)
    assert not v.accepted and not p.accepted and "cannot answer" in v.error


def test_noisy_device_with_repetition_code():
    dev = TableMrtPuf(1000, 16, 8, seed=66, noise_p=0.05, repetition=5)
    ex = ExtractorParams(r=5)
    # enrollment at a trusted facility is modelled as noiseless
    store = CrpStore(bytes(16), 16, 8)
    for c in dev.foreseen:
        store.add(c, ex(dev.god_mode_reference(c)))
    rng = Rng(2)
    n = 1000
    ok = sum(run_session(store, dev, rng, ex)[0].accepted for _ in range(n))
    expected = block_recovery_probability(0.05, 5, 8)
    assert expected >= 0.99
    assert within_sigma(ok / n, expected, n)


def test_quantum_relay_attack_destroys_authentication():
    rng = Rng(67)
    l, trials, accepted, per_bit = 32, 300, 0, []
    for _ in range(trials):
        dev = QuantumEurPuf.random(l, 2, rng)
        store = enroll(dev, 2, rng)
        # interception: every register is read once in freshly guessed bases
        for i in range(2):
            dev.evaluate(dev.challenge_for(i, rng.bits(l)))
        probe = dev.god_mode_snapshot()
        rec = store.records[0]
        per_bit.append(1 - (probe.evaluate(rec.challenge) ^ rec.secret).popcount() / l)
        accepted += run_session(store, dev, rng)[0].accepted
    assert within_sigma(sum(per_bit) / trials, 0.75, trials * l)
    assert accepted == 0  # expected 300 * 0.75**32, about 0.03


def test_untouched_quantum_device_authenticates(rng):
    dev = QuantumEurPuf.random(32, 4, rng)
    store = enroll(dev, 4, rng)
    assert all(run_session(store, dev, rng)[0].accepted for _ in range(4))


# ---------------------------------------------------------------- store file and transports

def test_store_roundtrip(tmp_path, table, rng):
    store = enroll(table, 20, rng)
    for _ in range(3):
        issue_challenge(store, rng)
    path = tmp_path / "crps.txt"
    store.save(path)
    head = path.read_text().splitlines()[0].split()
    assert head[0] == "PUFCRP1" and head[2:] == ["16", "64"] and len(bytes.fromhex(head[1])) == 16
    again = CrpStore.load(path)
    assert [(r.challenge, r.secret, r.used) for r in again.records] == \
        [(r.challenge, r.secret, r.used) for r in store.records]
    assert again.unused == 17


def test_store_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("PUFCRP2 00 4 4\n")
    with pytest.raises(ValueError):
        CrpStore.load(path)


def test_tcp_session(table, rng):
    store = enroll(table, 3, rng)
    srv = socket.create_server(("127.0.0.1", 0))
    port = srv.getsockname()[1]
    out = {}

    def verifier():
        conn, _ = srv.accept()
        out["v"] = serve(store, SocketTransport(conn), Rng(5), timeout=2.0)

    th = threading.Thread(target=verifier)
    th.start()
    p = authenticate(table, SocketTransport(socket.create_connection(("127.0.0.1", port))), timeout=2.0)
    th.join()
    srv.close()
    assert p.accepted and out["v"].accepted


def test_parse_address():
    assert parse_address("pipe:") is None
    assert parse_address("localhost:9000") == ("localhost", 9000)
    with pytest.raises(ValueError):
        parse_address("nowhere")
