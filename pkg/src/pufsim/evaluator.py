"""Security levels, requirement checks and the evaluation report.

Level formulas use exact rational arithmetic on the decimal value of the
inputs, so e.g. ``required_N(1e-15, 86400, 1)`` is exactly 8.64e19.

A report passes when the device is a PUF and every verdict passes.  Besides
the published requirement lists, two level verdicts are always appended:
the analytic level must not exceed the target, and the measured attack
success must not be significantly above it (Wilson lower bound).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .attacks import (AttackBudget, InsiderKnowledge, guess_attack_trials,
                      insider_attack, wilson_interval)
from .core import Definition1Verdict, PufDevice, check_definition1
from .errors import ParamsMismatch
from .extractor import IDENTITY, ExtractorParams
from .rng import Rng

BOREL_LEVEL = 1e-15


def _q(x) -> Fraction:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return Fraction(str(x))


def total_readout_time(dt_read: float, N: int) -> float:
    return float(_q(dt_read) * _q(N))


def level_bruteforce(dt_access: float, dt_read: float, N: int) -> float:
    return float(min(Fraction(1), _q(dt_access) / (_q(dt_read) * _q(N))))


def required_N(L_target: float, dt_access: float, dt_read: float) -> int:
    v = _q(dt_access) / (_q(dt_read) * _q(L_target))
    return math.ceil(v)


def level_quantum_guess(l: int) -> float:
    if l < 1:
        raise ValueError("l must be >= 1")
    return 0.75 ** l


def level_quantum_guess_exact(l: int) -> Fraction:
    return Fraction(3, 4) ** l


# ---------------------------------------------------------------- requirement lists

@dataclass
class MrtParams:
    N: int
    l: int
    l_S: int
    declared_entropy: float | None
    challenges_stored_externally: bool
    dt_access: float
    dt_read: float
    L_target: float

    def __post_init__(self):
        if min(self.N, self.l, self.l_S) < 1:
            raise ValueError("N, l, l_S must be >= 1")
        if not 0 < self.L_target <= 1:
            raise ValueError("L_target must be in (0, 1]")


@dataclass
class EurParams:
    l: int
    l_S: int
    erases_on_wrong_challenge: bool
    challenges_stored_externally: bool
    L_target: float

    def __post_init__(self):
        if min(self.l, self.l_S) < 1:
            raise ValueError("l, l_S must be >= 1")
        if not 0 < self.L_target <= 1:
            raise ValueError("L_target must be in (0, 1]")


@dataclass
class RequirementVerdict:
    id: str
    description: str
    passed: bool
    margin: float | None = None

    def to_dict(self):
        return asdict(self)


def check_mrt_requirements(p: MrtParams) -> list[RequirementVerdict]:
    need = required_N(p.L_target, p.dt_access, p.dt_read)
    entropy_floor = 2 * p.N * p.l
    log_n = math.log2(p.N)
    if p.declared_entropy is None:
        ent = RequirementVerdict("MRT-2", "I >= 2 N l (structured: entropy not declared)", False, None)
    else:
        ent = RequirementVerdict("MRT-2", "I >= 2 N l", p.declared_entropy >= entropy_floor,
                                 p.declared_entropy - entropy_floor)
    return [
        RequirementVerdict("MRT-1", "N >= L^-1 (dt_a / dt_r)", p.N >= need, float(p.N - need)),
        ent,
        RequirementVerdict("MRT-3", "operational challenges not contained in the PUF",
                           bool(p.challenges_stored_externally)),
        RequirementVerdict("MRT-4", "l, l_S >= log2(N)", min(p.l, p.l_S) >= log_n,
                           min(p.l, p.l_S) - log_n),
    ]


def check_eur_requirements(p: EurParams) -> list[RequirementVerdict]:
    floor = math.log2(1 / p.L_target)
    return [
        RequirementVerdict("EUR-1", "wrong challenge erases S and returns a random value",
                           bool(p.erases_on_wrong_challenge)),
        RequirementVerdict("EUR-2", "l, l_S >= log2(1/L)", min(p.l, p.l_S) >= floor,
                           min(p.l, p.l_S) - floor),
        RequirementVerdict("EUR-3", "operational challenges not contained in the PUF",
                           bool(p.challenges_stored_externally)),
    ]


def mrt_params_for(device: PufDevice, budget: AttackBudget, L_target: float) -> MrtParams:
    return MrtParams(N=device.foreseen.size, l=device.challenge_length, l_S=device.raw_secret_length,
                     declared_entropy=device.declared_entropy(),
                     challenges_stored_externally=device.challenges_stored_externally,
                     dt_access=budget.dt_access, dt_read=budget.dt_read, L_target=L_target)


def eur_params_for(device: PufDevice, L_target: float) -> EurParams:
    return EurParams(l=device.raw_secret_length, l_S=device.raw_secret_length,
                     erases_on_wrong_challenge=device.mechanism == "EUR",
                     challenges_stored_externally=device.challenges_stored_externally,
                     L_target=L_target)


# ---------------------------------------------------------------- report

QUESTIONS = (
    "Which form has the physical read-out and by which mechanism is the raw secret extracted?",
    "What is the form of the extraction step and how is it evaluated?",
    "What is the total information content in the set of all secrets?",
    "For what fraction L of the allowed challenges can the secret be computed or copied?",
    "Which physical security mechanism prevents computing or copying beyond that fraction?",
)


@dataclass
class SecurityReport:
    family: str
    definition1: Definition1Verdict
    levels: dict
    requirement_verdicts: list[RequirementVerdict]
    questionnaire: list[dict]
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.definition1.is_puf and all(v.passed for v in self.requirement_verdicts)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "pass": self.passed,
            "definition1": self.definition1.to_dict(),
            "levels": self.levels,
            "requirements": [v.to_dict() for v in self.requirement_verdicts],
            "questionnaire": self.questionnaire,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def render(self) -> str:
        lines = [f"Security evaluation: {self.family} -> {'PASS' if self.passed else 'FAIL'}",
                 f"  PUF definition satisfied: {self.definition1.is_puf} "
                 f"(deterministic={self.definition1.deterministic_on_M}, "
                 f"non-constant={self.definition1.non_constant})"]
        for key in sorted(self.levels):
            val = self.levels[key]
            lines.append(f"  {key}: {val:.4g}" if isinstance(val, float) else f"  {key}: {val}")
        lines.append("  Questions:")
        for i, qa in enumerate(self.questionnaire, 1):
            lines.append(f"   Q{i}. {qa['question']}")
            lines.append(f"       {qa['answer']}")
        lines.append("  Requirements:")
        for v in self.requirement_verdicts:
            margin = "" if v.margin is None else f" (margin {v.margin:.4g})"
            lines.append(f"   [{'pass' if v.passed else 'FAIL'}] {v.id}: {v.description}{margin}")
        for n in self.notes:
            lines.append(f"  note: {n}")
        return "\n".join(lines)


def _level_verdicts(analytic: float, hits: int, n: int, target: float) -> list[RequirementVerdict]:
    lo, _ = wilson_interval(hits, n)
    rate = hits / n if n else 0.0
    return [
        RequirementVerdict("LEVEL-analytic", "analytic security level <= L_target",
                           analytic <= target, target - analytic),
        RequirementVerdict("LEVEL-empirical", "measured attack success not significantly above L_target",
                           lo <= target, target - rate),
    ]


def evaluate_device(device: PufDevice, params: "MrtParams | EurParams", budget: AttackBudget, rng: Rng,
                    *, extractor: ExtractorParams = IDENTITY, n_trials: int = 10_000,
                    definition1_samples: int = 64) -> SecurityReport:
    """Run the definition check, requirement list, levels and empirical attacks.

    ``params`` selects the mechanism: :class:`MrtParams` for read-out-time
    devices, :class:`EurParams` for erasure devices.  Empirical attacks run
    on a god-mode snapshot so the evaluated device is left untouched.
    """
    is_eur = isinstance(params, EurParams)
    if is_eur != (device.mechanism == "EUR") or not isinstance(params, (MrtParams, EurParams)):
        raise ParamsMismatch(f"{type(params).__name__} does not match a {device.mechanism} "
                             f"device of family {device.family_id}")
    if params.l != device.challenge_length and not is_eur:
        raise ParamsMismatch("params.l differs from the device challenge length")
    notes = []
    if device.foreseen.size < 2:
        # a single foreseen challenge cannot be non-constant
        definition1 = Definition1Verdict(True, False, samples=1)
        notes.append("only one foreseen challenge: not a PUF")
    else:
        definition1 = check_definition1(device, rng=rng.fork("definition1"),
                                        n_samples=min(definition1_samples, device.foreseen.size),
                                        pf2=extractor if extractor.r > 1 or extractor.out_len else None)
    target = params.L_target

    if is_eur:
        verdicts = check_eur_requirements(params)
        analytic = level_quantum_guess(device.raw_secret_length)
        hits_matrix = guess_attack_trials(device.raw_secret_length, n_trials, rng.fork("guess"))
        full = hits_matrix.all(axis=1)
        hits, n = int(full.sum()), len(full)
        levels = {"L_guess": analytic, "L_guess_measured": hits / n,
                  "per_bit_measured": float(hits_matrix.mean()), "L_target": target}
        attack_desc = f"challenge guessing, {n} fresh devices"
    else:
        verdicts = check_mrt_requirements(params)
        analytic = level_bruteforce(params.dt_access, params.dt_read, params.N)
        transcript = insider_attack(device.god_mode_snapshot(), InsiderKnowledge.from_device(device),
                                    budget, n_trials, rng.fork("attack"))
        hits, n = transcript.hits, transcript.n_trials
        levels = {"L_bf": analytic, "L_measured": transcript.success_rate,
                  "total_readout_time": total_readout_time(params.dt_read, params.N),
                  "required_N": required_N(target, params.dt_access, params.dt_read),
                  "L_target": target}
        attack_desc = f"{transcript.attack}, {transcript.reads_used} reads, {n} trials"
        if params.declared_entropy is not None:
            notes.append("declared entropy counts challenge-set and secret entropy together")
    verdicts += _level_verdicts(analytic, hits, n, target)

    desc = device.describe()
    entropy = device.declared_entropy()
    answers = [
        desc.get("pf1", "unspecified"),
        extractor.describe(),
        f"{entropy:.6g} bits (declared by construction)" if entropy is not None
        else "structured; not declared",
        f"measured {hits}/{n} = {hits / n:.4g} ({attack_desc}); analytic level {analytic:.4g}",
        f"{'EUR' if is_eur else 'MRT'}: {desc.get('mechanism', 'unspecified')}",
    ]
    questionnaire = [{"question": q, "answer": a} for q, a in zip(QUESTIONS, answers)]
    return SecurityReport(device.family_id, definition1, levels, verdicts, questionnaire, notes)


def default_params(device: PufDevice, budget: AttackBudget, L_target: float):
    return eur_params_for(device, L_target) if device.mechanism == "EUR" \
        else mrt_params_for(device, budget, L_target)
