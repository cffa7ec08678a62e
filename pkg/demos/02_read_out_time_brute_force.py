"""Security from read-out time: a table of challenge/secret pairs.

An attacker who holds the device for dt_a seconds and needs dt_r seconds per
read can copy at most dt_a/dt_r pairs, so her success on a random challenge
is about dt_a / (dt_r * N).
"""
import math

from pufsim import Rng
from pufsim.attacks import AttackBudget, brute_force_attack
from pufsim.evaluator import default_params, evaluate_device, level_bruteforce, required_N
from pufsim.families import TableMrtPuf

dev = TableMrtPuf(N=100, l=16, l_S=32, seed=5)

print(" reads   measured   L_bf")
for reads in [0, 10, 25, 50, 100]:
    budget = AttackBudget.reads(reads)
    t = brute_force_attack(dev, budget, n_trials=10_000, rng=Rng(reads))
    analytic = level_bruteforce(budget.dt_access, budget.dt_read, dev.N) if reads else 0.0
    print(f"{reads:6d}   {t.success_rate:8.4f}   {analytic:.4f}")

# Full-scale sizing: one day of access, one second per read, level 1e-15.
n = required_N(1e-15, 86400, 1)
print(f"\npairs needed for L = 1e-15 with a day of access: {n:.3e} (about 10^{math.log10(n):.1f})")

# A desk-scale stand-in: 25 reads against 25000 pairs gives L_bf = 1e-3.
desk = TableMrtPuf(N=25_000, l=32, l_S=32, seed=52)
budget = AttackBudget(25, 1)
report = evaluate_device(desk, default_params(desk, budget, 1e-3), budget, Rng(2), n_trials=10_000)
print()
print(report.render())
