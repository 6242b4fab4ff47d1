"""SWAP test and asymmetric product test on a few hand-picked states.

Run with ``python3 demos/product_test_walkthrough.py``.
"""

import numpy as np

from qphlab.linalg import QState, random_state
from qphlab.product_tests import (
    AptLayout,
    apt_acceptance,
    apt_soundness_bound,
    best_product_overlap,
    swap_test_circuit,
)
from qphlab.verifier import simulate_circuit

plus = QState(np.array([1, 1]) / np.sqrt(2))
zero = QState.basis(0, 2)
print("SWAP test, |+> vs |0>:", simulate_circuit(swap_test_circuit(1), [plus, zero]))
print("SWAP test, |0> vs |0>:", simulate_circuit(swap_test_circuit(1), [zero, zero]))

# A Bell pair across B and C is as far from a product power as a qubit can be.
bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
layout = AptLayout.qubits(n=1, m=1, extra_dim=2)
res = best_product_overlap(bell, layout)
psi = random_state(2, np.random.default_rng(0))
print(f"Bell pair: epsilon = {res.epsilon:.3f}")
print(f"  acceptance {apt_acceptance(layout, [psi], bell):.6f}, bound {apt_soundness_bound(res.epsilon, layout):.6f}")

# Random entangled inputs sit below the bound, with room to spare.
rng = np.random.default_rng(1)
layout = AptLayout.qubits(n=2, m=1, extra_dim=2)
for _ in range(3):
    phi = random_state(layout.bc_dim, rng).amplitudes
    res = best_product_overlap(phi, layout)
    acc = apt_acceptance(layout, [random_state(2, rng).amplitudes for _ in range(2)], phi)
    bound = 1 - (res.epsilon - res.gap) / (2 * layout.m * layout.n)
    print(f"  eps {res.epsilon:.4f} (gap {res.gap:.4f}): acceptance {acc:.4f} <= {bound:.4f}")
