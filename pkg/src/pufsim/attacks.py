"""Outsider and insider attacks on simulated devices.

Attack code only ever sees an :class:`AttackerView`: a metered ``evaluate``
plus the public challenge-set descriptor.  Ground truth for scoring comes
from the device's god-mode reference and is fetched after all predictions
are fixed.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .bits import BitString
from .core import PufDevice
from .errors import InsufficientData, PufError
from .families import ArbiterPuf, KeyedHashPuf, QuantumEurPuf, arbiter_features, toy_eval
from .rng import Rng

Z95 = 1.959963984540054


class BudgetExceeded(PufError):
    pass


@dataclass(frozen=True)
class AttackBudget:
    """Access period and per-pair read-out time, both in seconds."""

    dt_access: float
    dt_read: float

    def __post_init__(self):
        if not (self.dt_access > 0 and self.dt_read > 0):
            raise ValueError("dt_access and dt_read must be positive")
        # exact ratio so that e.g. 0.3 / 0.1 gives 3 reads, not 2
        reads = math.floor(Fraction(str(self.dt_access)) / Fraction(str(self.dt_read)))
        object.__setattr__(self, "max_reads", reads)

    max_reads: int = field(init=False, repr=False, compare=False)

    @classmethod
    def reads(cls, n: int) -> AttackBudget:
        """Budget allowing exactly ``n`` reads at one second each (``n=0`` allowed)."""
        if n == 0:
            return cls(0.5, 1.0)
        return cls(float(n), 1.0)

    def to_dict(self):
        return {"dt_access": self.dt_access, "dt_read": self.dt_read, "max_reads": self.max_reads}


class AttackerView:
    """The attacker's handle on a device during the access period."""

    def __init__(self, device: PufDevice, budget: AttackBudget | None = None):
        self._device = device
        self.max_reads = budget.max_reads if budget is not None else math.inf
        self.reads_used = 0
        self.family_id = device.family_id
        self.challenge_length = device.challenge_length
        self.raw_secret_length = device.raw_secret_length
        self._foreseen = device.foreseen

    @property
    def remaining(self):
        return self.max_reads - self.reads_used

    def evaluate(self, c: BitString) -> BitString:
        if self.reads_used >= self.max_reads:
            raise BudgetExceeded(f"read budget of {self.max_reads} exhausted")
        self.reads_used += 1
        return self._device.evaluate(c)

    def sample_challenge(self, rng: Rng) -> BitString:
        return self._foreseen.sample(rng)

    def sample_distinct(self, rng: Rng, n: int) -> list[BitString]:
        return self._foreseen.sample_distinct(rng, n)

    @property
    def n_foreseen(self) -> int:
        return self._foreseen.size


class Prediction(NamedTuple):
    challenge: BitString
    predicted: BitString
    true: BitString
    hit: bool


def wilson_interval(hits: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = hits / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


def binomial_sigma(p: float, n: int) -> float:
    return math.sqrt(p * (1 - p) / n)


@dataclass
class AttackTranscript:
    attack: str
    family: str
    params: dict
    budget: dict
    reads_used: int
    predictions: list[Prediction] = field(default_factory=list)
    per_bit_rate: float | None = None

    @property
    def n_trials(self) -> int:
        return len(self.predictions)

    @property
    def hits(self) -> int:
        return sum(p.hit for p in self.predictions)

    @property
    def success_rate(self) -> float:
        return self.hits / self.n_trials if self.predictions else 0.0

    @property
    def ci95(self) -> tuple[float, float]:
        return wilson_interval(self.hits, self.n_trials)

    def to_dict(self) -> dict:
        out = {
            "attack": self.attack,
            "family": self.family,
            "params": self.params,
            "budget": self.budget,
            "reads_used": self.reads_used,
            "n_trials": self.n_trials,
            "success_rate": self.success_rate,
            "ci95": list(self.ci95),
        }
        if self.per_bit_rate is not None:
            out["per_bit_rate"] = self.per_bit_rate
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def score(device: PufDevice, guesses: Sequence[tuple[BitString, BitString]]) -> list[Prediction]:
    """Compare (challenge, predicted raw secret) pairs with the device's ground truth."""
    out = []
    for c, pred in guesses:
        true = device.god_mode_reference(c)
        out.append(Prediction(c, pred, true, pred == true))
    return out


def _transcript(name, device, budget, view, predictions, per_bit=None):
    return AttackTranscript(name, device.family_id, device.structure(), budget.to_dict(),
                            view.reads_used, predictions, per_bit)


# ---------------------------------------------------------------- model 1: brute force

def _read_phase(view: AttackerView, rng: Rng) -> dict[BitString, BitString]:
    n = int(min(view.max_reads, view.n_foreseen))
    return {c: view.evaluate(c) for c in view.sample_distinct(rng, n)}


def _guess_chunk(view: AttackerView, memory: dict, rng: Rng, n: int):
    out = []
    for _ in range(n):
        c = view.sample_challenge(rng)
        pred = memory.get(c)
        if pred is None:
            pred = rng.bits(view.raw_secret_length)
        out.append((c, pred))
    return out


def brute_force_attack(device: PufDevice, budget: AttackBudget, n_trials: int, rng: Rng,
                       workers: int = 1) -> AttackTranscript:
    """Read up to ``max_reads`` distinct foreseen CRPs, then answer random challenges.

    Unread challenges get a uniform guess.  With ``workers > 1`` the
    prediction phase is split over forked streams and merged in worker
    order, so the result depends only on ``rng.seed`` and ``workers``.
    """
    view = AttackerView(device, budget)
    memory = _read_phase(view, rng.fork("reads"))
    if workers <= 1:
        guesses = _guess_chunk(view, memory, rng.fork("trials"), n_trials)
    else:
        sizes = [n_trials // workers + (i < n_trials % workers) for i in range(workers)]
        with ThreadPoolExecutor(workers) as pool:
            parts = pool.map(lambda i: _guess_chunk(view, memory, rng.fork(f"trials-{i}"), sizes[i]),
                             range(workers))
            guesses = [g for part in parts for g in part]
    return _transcript("brute_force", device, budget, view, score(device, guesses))


def expected_brute_force_rate(max_reads: int, N: int, l_S: int) -> float:
    frac = min(1.0, max_reads / N)
    return frac + (1 - frac) * 2.0 ** (-l_S)


# ---------------------------------------------------------------- ML attack on arbiters

@dataclass
class MlAttackResult:
    weights: np.ndarray
    train_accuracy: float
    held_out_accuracy: float | None
    epochs: int

    def predict(self, challenges: np.ndarray) -> np.ndarray:
        return predict_arbiter(self.weights, challenges)


def predict_arbiter(weights: np.ndarray, challenges: np.ndarray) -> np.ndarray:
    return (arbiter_features(challenges) @ weights > 0).astype(np.uint8)


def _as_arrays(data) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, tuple) and len(data) == 2 and isinstance(data[0], np.ndarray):
        X, y = data
    else:
        X = np.array([c.to_array() for c, _ in data], dtype=np.uint8)
        y = np.array([int(b) for _, b in data], dtype=np.uint8)
    return np.atleast_2d(X), np.asarray(y).ravel()


def ml_attack_arbiter(training, k: int, held_out=None, *, learning_rate: float = 0.05,
                      max_epochs: int = 200, target_accuracy: float = 0.99, batch_size: int = 32,
                      init: np.ndarray | None = None, rng: Rng | None = None) -> MlAttackResult:
    """Logistic-regression model of a single arbiter output.

    ``training``/``held_out`` are lists of ``(challenge, bit)`` pairs or
    ``(X, y)`` array tuples.  Mini-batch gradient descent on the parity
    features runs for at most ``max_epochs`` passes and stops as soon as
    training accuracy reaches ``target_accuracy``.
    """
    X, y = _as_arrays(training)
    if len(y) < k + 1:
        raise InsufficientData(f"need at least {k + 1} CRPs for {k + 1} weights, got {len(y)}")
    if X.shape[1] != k:
        raise ValueError(f"challenges have {X.shape[1]} bits, expected {k}")
    rng = rng or Rng(0)
    phi = arbiter_features(X)
    yf = y.astype(np.float64)
    w = np.zeros(k + 1) if init is None else np.array(init, dtype=np.float64)

    def accuracy(w):
        return float(np.mean((phi @ w > 0) == (y == 1)))

    acc = accuracy(w)
    epochs = 0
    while acc < target_accuracy and epochs < max_epochs:
        order = rng.np.permutation(len(y))
        for start in range(0, len(y), batch_size):
            idx = order[start:start + batch_size]
            z = phi[idx] @ w
            p = 0.5 * (1.0 + np.tanh(0.5 * z))
            w -= learning_rate * (phi[idx].T @ (p - yf[idx])) / len(idx)
        epochs += 1
        acc = accuracy(w)

    held = None
    if held_out is not None:
        Xh, yh = _as_arrays(held_out)
        held = float(np.mean(predict_arbiter(w, Xh) == yh))
    return MlAttackResult(w, acc, held, epochs)


def arbiter_crps(device: ArbiterPuf, n: int, rng: Rng, output: int = 0):
    """``n`` uniformly random challenges and the noise-free response of one output."""
    X = rng.np.integers(0, 2, size=(n, device.k), dtype=np.uint8)
    return X, device.evaluate_batch(X)[:, output]


# ---------------------------------------------------------------- quantum guessing

_ONE_READ = AttackBudget.reads(1)


def guess_challenge_attack(device: QuantumEurPuf, rng: Rng, bases: BitString | None = None,
                           register: int = 0) -> np.ndarray:
    """Guess the basis string of one register, read once, and score bitwise.

    Returns the boolean per-bit hit vector against the prepared secret.
    """
    view = AttackerView(device, _ONE_READ)
    l = device.l
    guess = bases if bases is not None else rng.bits(l)
    c = guess if device.index_bits == 0 else BitString.from_int(register, device.index_bits) + guess
    predicted = view.evaluate(c)
    true = device.god_mode_reference(c)
    agree = ~(predicted.value ^ true.value)
    return np.array([(agree >> (l - 1 - i)) & 1 for i in range(l)], dtype=bool)


def guess_attack_trials(l: int, n_trials: int, rng: Rng) -> np.ndarray:
    """Run the guessing attack on ``n_trials`` fresh single-register devices.

    Returns an ``(n_trials, l)`` boolean hit matrix.
    """
    hits = np.empty((n_trials, l), dtype=bool)
    for t in range(n_trials):
        hits[t] = guess_challenge_attack(QuantumEurPuf.random(l, 1, rng), rng)
    return hits


# ---------------------------------------------------------------- model 2: insider

@dataclass
class InsiderKnowledge:
    """Manufacturer-level structural knowledge of one device.

    ``leaked_key`` is a misconfiguration fixture: it breaks the
    structure-only rule on purpose.
    """

    family: str
    structure: dict
    leaked_key: bytes | None = None

    @classmethod
    def from_device(cls, device: PufDevice) -> InsiderKnowledge:
        return cls(device.family_id, dict(device.structure()))


def toy_clone_attack(device: PufDevice, budget: AttackBudget, n_trials: int, rng: Rng) -> AttackTranscript:
    """Learn both toy outputs with one read per majority class, then compute."""
    view = AttackerView(device, budget)
    l = view.challenge_length
    learned = {}
    probes = [BitString.ones(l), BitString.zeros(l)]
    for c in probes[:int(min(2, view.max_reads))]:
        learned[toy_eval(c)] = view.evaluate(c)
    guesses = []
    for _ in range(n_trials):
        c = view.sample_challenge(rng)
        pred = learned.get(toy_eval(c))
        guesses.append((c, pred if pred is not None else rng.bits(view.raw_secret_length)))
    return _transcript("toy_clone", device, budget, view, score(device, guesses))


def _arbiter_insider(device: ArbiterPuf, knowledge: InsiderKnowledge, budget: AttackBudget,
                     n_trials: int, rng: Rng) -> AttackTranscript:
    view = AttackerView(device, budget)
    k, l_S, r = knowledge.structure["k"], knowledge.structure["l_S"], knowledge.structure.get("r", 1)
    n_reads = int(min(view.max_reads, 1 << k))
    reads = [view.sample_challenge(rng) for _ in range(n_reads)]
    X = np.array([c.to_array() for c in reads], dtype=np.uint8).reshape(-1, k)
    raw = np.array([view.evaluate(c).to_array() for c in reads], dtype=np.uint8).reshape(-1, l_S * r)
    Y = (raw.reshape(-1, l_S, r).sum(axis=2) > r // 2).astype(np.uint8)
    models = []
    for j in range(l_S):
        if n_reads >= k + 1:
            models.append(ml_attack_arbiter((X, Y[:, j]), k, rng=rng.fork(f"ml-{j}")).weights)
        else:
            models.append(None)
    trng = rng.fork("trials")
    guesses = []
    for _ in range(n_trials):
        c = view.sample_challenge(trng)
        bits = [int(predict_arbiter(w, c.to_array()[None, :])[0]) if w is not None else trng.bit()
                for w in models]
        guesses.append((c, BitString(np.repeat(bits, r).tolist())))
    predictions = score(device, guesses)
    per_bit = float(np.mean([(p.predicted.to_array() == p.true.to_array()).mean() for p in predictions])) \
        if predictions else None
    return _transcript("insider_ml", device, budget, view, predictions, per_bit)


def insider_attack(device: PufDevice, knowledge: InsiderKnowledge, budget: AttackBudget,
                   n_trials: int, rng: Rng) -> AttackTranscript:
    """Best structural strategy for the family named in ``knowledge``."""
    fam = knowledge.family
    if fam == "keyed_hash" and knowledge.leaked_key is not None:
        s = knowledge.structure
        clone = KeyedHashPuf(s["l"], s["l_S"], key=knowledge.leaked_key)
        view = AttackerView(device, budget)
        guesses = []
        for _ in range(n_trials):
            c = view.sample_challenge(rng)
            guesses.append((c, clone.evaluate(c)))
        return _transcript("insider_leaked_key", device, budget, view, score(device, guesses))
    if fam == "arbiter":
        return _arbiter_insider(device, knowledge, budget, n_trials, rng)
    if fam == "toy":
        return toy_clone_attack(device, budget, n_trials, rng)
    # random tables, keyed hashes without the key, quantum registers: structure does not help
    t = brute_force_attack(device, budget, n_trials, rng)
    t.attack = "insider_brute_force"
    return t
