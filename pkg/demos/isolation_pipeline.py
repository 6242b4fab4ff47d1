"""Isolate a witness with random parity constraints, then read it out with one BV query.

Run with ``python3 demos/isolation_pipeline.py``.
"""

import numpy as np

from qphlab import isolation as iso

ell = 4
rng = np.random.default_rng(3)
p1, p2 = iso.qckl_thresholds(ell)
inst = iso.TqcmappInstance(iso.witness_set_circuit(ell, ["0011", "0110", "1100"]), "", p1, p2, ell)
print("witnesses:", inst.witnesses())

decider = iso.CircuitDecider(coins=ell)
for attempt in range(8):
    u = iso.vv_isolate(inst, rng)
    found = iso.search_to_decision(u, decider, rng)
    print(f"draw {attempt}: {len(u.constraints)} constraints -> {u.classify():7s} search -> {found}")

est = iso.isolation_frequency(inst, 50_000, seed=0)
print(f"unique-isolation rate {est.rate:.4f} (99% lower {est.lower():.4f}, floor {iso.isolation_floor(ell):.4f})")

verifier = iso.relative_witness_circuit(ell, ["0000", "0011", "1010"])
flags = iso.qckl_trials("1", "0110", verifier, decider, 100_000, seed=1)
print(f"composed verifier accepts a YES pair with rate {flags.mean():.4f}")
flags = iso.qckl_trials("0", "0110", verifier, decider, 100_000, seed=2)
print(f"and a NO pair with rate {flags.mean():.4f} (ceiling {1 / ell**4:.4f})")
