"""What counts as a PUF, and why being one is not enough.

Run with ``python3 demos/01_definition_and_toy_clone.py``.
"""
from pufsim import BitString, Rng
from pufsim.attacks import AttackBudget, toy_clone_attack
from pufsim.core import check_definition1
from pufsim.families import ConstantCuf, ToyMajorityPuf, toy_eval

# The toy device answers with one of two fixed strings depending on whether
# the challenge has more ones than zeros.
for c in ["11101", "00010", "10"]:
    print(f"toy({c}) = {toy_eval(BitString(c))}")

# It is deterministic and not constant, so it passes the PUF definition...
toy = ToyMajorityPuf(4)
verdict = check_definition1(toy, [BitString("1101"), BitString("0010")], repeats=3)
print("toy is a PUF:", verdict.is_puf, "witness:", verdict.witness_pair)

# ...but two reads are enough to predict every answer.
t = toy_clone_attack(toy, AttackBudget.reads(2), n_trials=1000, rng=Rng(1))
print(f"clone after {t.reads_used} reads predicts {t.success_rate:.0%} of random challenges")

# A conventional unclonable function returns the same secret for every
# challenge and is therefore not a PUF at all.
cuf = ConstantCuf(8, 32, seed=1)
v = check_definition1(cuf, rng=Rng(2))
print("constant CUF is a PUF:", v.is_puf, "(deterministic:", v.deterministic_on_M, "non-constant:",
      v.non_constant, ")")
