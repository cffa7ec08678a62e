"""Arbiter PUFs are linear in the parity features, so they can be learned."""
import numpy as np

from pufsim import Rng
from pufsim.attacks import arbiter_crps, ml_attack_arbiter
from pufsim.families import ArbiterPuf, arbiter_feature

dev = ArbiterPuf(k=64, l_S=1, seed=3)

# The feature vector is a running product of (1 - 2 c_j) from the end of the
# challenge, with a constant +1 appended.
c = Rng(0).bits(8)
print("challenge", c, "features", arbiter_feature(c))

test = arbiter_crps(dev, 10_000, Rng(2))
print("\ntraining CRPs   held-out accuracy   epochs")
for n in [100, 300, 1000, 3000, 10_000]:
    res = ml_attack_arbiter(arbiter_crps(dev, n, Rng(n)), 64, test, rng=Rng(3))
    print(f"{n:13d}   {res.held_out_accuracy:17.4f}   {res.epochs:6d}")

# The learned direction lines up with the hidden weight vector.
w_true = dev.god_mode_weights()[0]
cos = res.weights @ w_true / (np.linalg.norm(res.weights) * np.linalg.norm(w_true))
print(f"\ncosine(learned, true weights) = {cos:.3f}")
