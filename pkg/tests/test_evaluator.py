import json
import math
from fractions import Fraction

import pytest

from pufsim.attacks import AttackBudget, brute_force_attack
from pufsim.errors import ParamsMismatch
from pufsim.evaluator import (BOREL_LEVEL, QUESTIONS, EurParams, MrtParams, check_eur_requirements,
                              check_mrt_requirements, default_params, eur_params_for, evaluate_device,
                              level_bruteforce, level_quantum_guess, level_quantum_guess_exact,
                              mrt_params_for, required_N, total_readout_time)
from pufsim.families import ArbiterPuf, ConstantCuf, QuantumEurPuf, TableMrtPuf, ToyMajorityPuf
from pufsim.rng import Rng

from conftest import within_sigma


# ---------------------------------------------------------------- formulas

@pytest.mark.parametrize("dt_r, N, t", [(1, 10, 10), (1, 8.64e19, 8.64e19), (0.5, 4, 2)])
def test_total_readout_time(dt_r, N, t):
    assert total_readout_time(dt_r, N) == t


@pytest.mark.parametrize("dt_a, dt_r, N, L", [
    (86400, 1, 86_400_000_000_000_000_000, 1e-15),
    (100, 1, 50, 1.0),
    (25, 1, 100, 0.25),
])
def test_level_bruteforce(dt_a, dt_r, N, L):
    assert level_bruteforce(dt_a, dt_r, N) == L


def test_required_n():
    assert required_N(1e-15, 86400, 1) == 86_400_000_000_000_000_000
    assert math.log10(required_N(1e-15, 86400, 1)) == pytest.approx(20, abs=0.1)
    assert required_N(1, 10, 1) == 10
    assert required_N(0.5, 10, 1) == 20


def test_quantum_level():
    assert level_quantum_guess(1) == 0.75
    assert level_quantum_guess_exact(4) == Fraction(81, 256)
    assert level_quantum_guess(4) == 0.31640625
    assert level_quantum_guess(128) < BOREL_LEVEL
    assert level_quantum_guess(128) == pytest.approx(1.0e-16, rel=0.1)
    with pytest.raises(ValueError):
        level_quantum_guess(0)


def test_borel_threshold_qubits():
    smallest = next(l for l in range(1, 300) if level_quantum_guess_exact(l) < Fraction(1, 10**15))
    assert smallest == 121
    assert level_quantum_guess_exact(120) >= Fraction(1, 10**15)


def test_level_never_exceeds_target_when_sized_by_required_n():
    rng = Rng(51)
    for _ in range(1000):
        L = 10 ** (-15 * rng.random())
        dt_a = 10 ** (6 * rng.random())
        dt_r = 10 ** (-3 + 4 * rng.random())
        assert level_bruteforce(dt_a, dt_r, required_N(L, dt_a, dt_r)) <= L


# ---------------------------------------------------------------- requirement lists

def _mrt(**kw):
    base = dict(N=86_400_000_000_000_000_000, l=128, l_S=128, declared_entropy=None,
                challenges_stored_externally=True, dt_access=86400, dt_read=1, L_target=1e-15)
    base.update(kw)
    if base["declared_entropy"] is None:
        base["declared_entropy"] = 2 * base["N"] * base["l"]
    return MrtParams(**base)


def test_mrt_full_scale_passes():
    verdicts = check_mrt_requirements(_mrt())
    assert [v.id for v in verdicts] == ["MRT-1", "MRT-2", "MRT-3", "MRT-4"]
    assert all(v.passed for v in verdicts)


def test_mrt_small_n_fails_requirement_one():
    v = {v.id: v for v in check_mrt_requirements(_mrt(N=100, declared_entropy=2 * 100 * 128))}
    assert not v["MRT-1"].passed and v["MRT-2"].passed


def test_mrt_entropy_boundary():
    p = _mrt()
    v = {v.id: v for v in check_mrt_requirements(_mrt(declared_entropy=2 * p.N * p.l - 1))}
    assert not v["MRT-2"].passed and v["MRT-2"].margin == -1


def test_mrt_internal_challenges_and_short_strings():
    v = {v.id: v for v in check_mrt_requirements(_mrt(challenges_stored_externally=False, l_S=60))}
    assert not v["MRT-3"].passed and not v["MRT-4"].passed


def test_mrt_params_validation():
    with pytest.raises(ValueError):
        _mrt(N=0)
    with pytest.raises(ValueError):
        _mrt(L_target=0)


def test_eur_requirements():
    ok = EurParams(128, 128, True, True, 1e-15)
    assert all(v.passed for v in check_eur_requirements(ok))
    short = {v.id: v for v in check_eur_requirements(EurParams(32, 32, True, True, 1e-15))}
    assert not short["EUR-2"].passed
    assert short["EUR-2"].margin == pytest.approx(32 - 49.83, abs=0.01)
    no_erase = {v.id: v for v in check_eur_requirements(EurParams(128, 128, False, True, 1e-15))}
    assert not no_erase["EUR-1"].passed


def test_params_from_devices():
    table = TableMrtPuf(10, 8, 16, seed=1)
    p = mrt_params_for(table, AttackBudget(2, 1), 0.5)
    assert (p.N, p.l, p.l_S, p.declared_entropy) == (10, 8, 16, 10 * 24)
    assert mrt_params_for(ArbiterPuf(16, 1, seed=1), AttackBudget(2, 1), 0.5).declared_entropy is None
    q = eur_params_for(QuantumEurPuf.from_seed(1, 2, 16), 1e-3)
    assert q.erases_on_wrong_challenge and q.l == 16


# ---------------------------------------------------------------- reports

def test_toy_is_puf_but_fails_evaluation():
    dev = ToyMajorityPuf(10)
    budget = AttackBudget(2, 1)
    report = evaluate_device(dev, default_params(dev, budget, 1e-3), budget, Rng(1), n_trials=500)
    assert report.definition1.is_puf and not report.passed
    assert report.levels["L_measured"] == 1.0
    assert len(report.questionnaire) == 5
    assert [qa["question"] for qa in report.questionnaire] == list(QUESTIONS)


def test_desk_scale_table_passes():
    dev = TableMrtPuf(25_000, 32, 32, seed=52)
    budget = AttackBudget(25, 1)
    report = evaluate_device(dev, default_params(dev, budget, 1e-3), budget, Rng(2), n_trials=10_000)
    assert report.levels["L_bf"] == 1e-3
    assert report.passed, report.render()
    assert dev.evaluations == 0


def test_quantum_128_passes_borel():
    dev = QuantumEurPuf.from_seed(53, N=2, l=128)
    budget = AttackBudget(1, 1)
    report = evaluate_device(dev, default_params(dev, budget, 1e-15), budget, Rng(3), n_trials=2000)
    assert report.passed, report.render()
    assert report.levels["L_guess"] < 1e-15
    assert report.levels["L_guess_measured"] == 0.0


def test_short_quantum_fails_borel():
    dev = QuantumEurPuf.from_seed(54, N=2, l=32)
    budget = AttackBudget(1, 1)
    report = evaluate_device(dev, default_params(dev, budget, 1e-15), budget, Rng(4), n_trials=200)
    assert not report.passed


def test_constant_cuf_fails():
    dev = ConstantCuf(16, 32, seed=1)
    budget = AttackBudget(1, 1)
    report = evaluate_device(dev, default_params(dev, budget, 0.5), budget, Rng(5), n_trials=100)
    assert not report.definition1.is_puf and not report.passed


def test_single_register_quantum_is_not_a_puf():
    dev = QuantumEurPuf.from_seed(55, N=1, l=128)
    report = evaluate_device(dev, default_params(dev, AttackBudget(1, 1), 1e-15), AttackBudget(1, 1), Rng(6),
                             n_trials=100)
    assert not report.passed and report.notes


def test_params_mismatch():
    q = QuantumEurPuf.from_seed(1, N=2, l=16)
    t = TableMrtPuf(10, 8, 8, seed=1)
    with pytest.raises(ParamsMismatch):
        evaluate_device(q, mrt_params_for(t, AttackBudget(1, 1), 0.5), AttackBudget(1, 1), Rng(1))
    with pytest.raises(ParamsMismatch):
        evaluate_device(t, eur_params_for(q, 0.5), AttackBudget(1, 1), Rng(1))


def test_report_serializes():
    dev = TableMrtPuf(100, 16, 32, seed=1)
    budget = AttackBudget(25, 1)
    report = evaluate_device(dev, default_params(dev, budget, 0.5), budget, Rng(7), n_trials=500)
    doc = json.loads(report.to_json())
    assert doc["pass"] == report.passed
    assert {"definition1", "levels", "requirements", "questionnaire"} <= doc.keys()
    assert "MRT-1" in report.render()


@pytest.mark.parametrize("N, reads", [(n, r) for n in (20, 50, 100, 200, 400) for r in (1, 5, 17, 60)])
def test_empirical_brute_force_matches_level(N, reads):
    dev = TableMrtPuf(N, 12, 32, seed=N + reads)
    budget = AttackBudget(reads, 1)
    n = 4000
    t = brute_force_attack(dev, budget, n, Rng(57).fork(f"{N}/{reads}"))
    assert within_sigma(t.success_rate, level_bruteforce(budget.dt_access, budget.dt_read, N), n)


def test_any_level_above_borel_fails():
    dev = TableMrtPuf(1000, 16, 32, seed=56)
    budget = AttackBudget(1, 1)
    report = evaluate_device(dev, default_params(dev, budget, BOREL_LEVEL), budget, Rng(8), n_trials=200)
    assert report.levels["L_bf"] > BOREL_LEVEL and not report.passed
