"""Quantified proof games: who moves first matters.

Run with ``python3 demos/game_values.py``.
"""

import numpy as np

from qphlab.games import classical_game_value, quantum_game_value
from qphlab.product_tests import swap_test_operator
from qphlab.transforms import (
    SimulationGameSpec,
    qcph_to_qphpure_transform,
    simulation_completeness_bound,
    simulation_soundness_bound,
)
from qphlab.verifier import AcceptOperator, QuantifiedGame

swap = swap_test_operator(2)
for prefix in ("EA", "AE"):
    res = quantum_game_value(QuantifiedGame(swap, tuple(prefix)), grid_points=4000)
    print(f"SWAP game {prefix}: {res.value:.4f} in [{res.lower:.4f}, {res.upper:.4f}]")

# A classical two-move game and its pure-state simulation.
table = np.array([[0.95, 0.05], [0.1, 0.9]])
op = AcceptOperator(np.diag(table.reshape(-1)), (2, 2))
for m in (1, 2):
    spec = SimulationGameSpec(op, (1, 1), m)
    c = classical_game_value(spec.classical_game)
    res = quantum_game_value(qcph_to_qphpure_transform(spec))
    print(f"m={m}: classical value {c:.3f}, simulated value {res.value:.4f} "
          f"(floor {simulation_completeness_bound(c, m):.4f})")

no = AcceptOperator(np.diag([0.1, 0.05, 0.9, 0.95]), (2, 2))
spec = SimulationGameSpec(no, (1, 1), 2)
s = classical_game_value(spec.classical_game)
res = quantum_game_value(qcph_to_qphpure_transform(spec))
print(f"NO side: classical {s:.3f}, simulated {res.value:.4f} (ceiling {simulation_soundness_bound(s, 2):.4f})")
