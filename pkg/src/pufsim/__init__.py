"""Simulation and security evaluation of physical unclonable functions."""

__version__ = "0.1.0"

from .bits import BitString, hamming_distance
from .rng import Rng, rng_fork
from .core import (AllStrings, ExplicitChallengeSet, PredicateChallengeSet, PufDevice, Majority,
                   Definition1Verdict, check_definition1, popcount_majority)
from .families import (ArbiterPuf, ConstantCuf, KeyedHashPuf, QuantumEurPuf, QubitRegister, TableMrtPuf,
                       ToyMajorityPuf, arbiter_feature, device_from_params, load_family, quantum_measure,
                       quantum_prepare, toy_eval)
from .extractor import ExtractorParams, pf2_amplify, pf2_correct, pf3_respond
from .attacks import (AttackBudget, AttackTranscript, InsiderKnowledge, brute_force_attack,
                      guess_challenge_attack, insider_attack, ml_attack_arbiter)
from .evaluator import (EurParams, MrtParams, SecurityReport, check_eur_requirements, check_mrt_requirements,
                        evaluate_device, level_bruteforce, level_quantum_guess, required_N, total_readout_time)
from .authproto import (CrpStore, authenticate, enroll, issue_challenge, prover_respond, serve,
                        verifier_check)

__all__ = [
    "BitString", "hamming_distance", "Rng", "rng_fork",
    "AllStrings", "ExplicitChallengeSet", "PredicateChallengeSet", "PufDevice", "Majority",
    "Definition1Verdict", "check_definition1", "popcount_majority",
    "ArbiterPuf", "ConstantCuf", "KeyedHashPuf", "QuantumEurPuf", "QubitRegister", "TableMrtPuf",
    "ToyMajorityPuf", "arbiter_feature", "device_from_params", "load_family", "quantum_measure",
    "quantum_prepare", "toy_eval",
    "ExtractorParams", "pf2_amplify", "pf2_correct", "pf3_respond",
    "AttackBudget", "AttackTranscript", "InsiderKnowledge", "brute_force_attack", "guess_challenge_attack",
    "insider_attack", "ml_attack_arbiter",
    "EurParams", "MrtParams", "SecurityReport", "check_eur_requirements", "check_mrt_requirements",
    "evaluate_device", "level_bruteforce", "level_quantum_guess", "required_N", "total_readout_time",
    "CrpStore", "authenticate", "enroll", "issue_challenge", "prover_respond", "serve", "verifier_check",
]
