"""Qubits prepared in secret bases: a wrong guess erases the secret."""
from pufsim import BitString, Rng
from pufsim.attacks import AttackBudget, guess_attack_trials
from pufsim.evaluator import default_params, evaluate_device, level_quantum_guess
from pufsim.families import QuantumEurPuf, quantum_measure, quantum_prepare

rng = Rng(7)

reg = quantum_prepare(BitString("1011"), BitString("0110"))
print("prepared cells (basis, value):", reg.cells)
print("read in the right bases:", quantum_measure(reg, BitString("0110"), rng))
print("read in wrong bases:    ", quantum_measure(reg, BitString("1001"), rng))
print("right bases again:      ", quantum_measure(reg, BitString("0110"), rng), "(secret is gone)")

# Guessing the bases gets each bit right with probability 3/4.
print("\n  l   measured   (3/4)^l")
for l in [1, 2, 4, 8]:
    hits = guess_attack_trials(l, 50_000, rng.fork(f"guess-{l}"))
    print(f"{l:3d}   {hits.all(axis=1).mean():8.5f}   {level_quantum_guess(l):.5f}")

print(f"\n128 qubits: level {level_quantum_guess(128):.3e}")
dev = QuantumEurPuf.from_seed(53, N=2, l=128)
budget = AttackBudget(1, 1)
report = evaluate_device(dev, default_params(dev, budget, 1e-15), budget, Rng(3), n_trials=2000)
print(report.render())
