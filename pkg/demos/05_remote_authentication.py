"""Enroll a device, then authenticate it remotely with one-time challenges."""
from pufsim import Rng
from pufsim.authproto import enroll, run_session
from pufsim.extractor import ExtractorParams
from pufsim.families import KeyedHashPuf, QuantumEurPuf, TableMrtPuf

rng = Rng(11)

# A trusted party reads challenge/secret pairs into a store.
dev = KeyedHashPuf(64, 128, seed=1)
store = enroll(dev, 200, rng)
print(f"enrolled {len(store)} pairs")

honest = sum(run_session(store, dev, rng)[0].accepted for _ in range(100))
impostor = sum(run_session(store, KeyedHashPuf(64, 128, seed=99 + i), rng)[0].accepted for i in range(100))
print(f"honest accepted {honest}/100, impostors accepted {impostor}/100, unused pairs left {store.unused}")

# A noisy read-out needs error correction: 5 reads per bit, majority vote.
# Enrollment happens under controlled conditions, modelled here as a
# noiseless twin built from the same seed.
noisy = TableMrtPuf(500, 16, 8, seed=2, noise_p=0.05, repetition=5)
ex = ExtractorParams(r=5)
store = enroll(TableMrtPuf(500, 16, 8, seed=2, repetition=5), 500, rng, ex)
ok = sum(run_session(store, noisy, rng, ex)[0].accepted for _ in range(500))
print(f"noisy device with repetition code: {ok}/500 accepted")

# Anyone who intercepts a quantum device and reads it destroys the secret.
q = QuantumEurPuf.random(32, 2, rng)
store = enroll(q, 2, rng)
for i in range(2):
    q.evaluate(q.challenge_for(i, rng.bits(32)))
print("after interception:", "accept" if run_session(store, q, rng)[0].accepted else "reject")
