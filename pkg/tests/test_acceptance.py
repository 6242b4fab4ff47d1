"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected in the terminal
summary) and then asserts the same condition.
"""

import time
from fractions import Fraction
from itertools import product

import numpy as np

from qphlab import cli
from qphlab import isolation as iso
from qphlab.games import classical_game_value, quantum_game_value
from qphlab.harness import EXPERIMENTS, isolation_instance
from qphlab.linalg import (
    DensityOp,
    QState,
    nearby_state,
    projected_trace_gap,
    random_density,
    random_projector,
    random_state,
)
from qphlab.product_tests import (
    AptLayout,
    apt_acceptance,
    best_product_overlap,
    swap_test_circuit,
    swap_test_operator,
)
from qphlab.transforms import (
    AmplifiedGameSpec,
    SimulationGameSpec,
    amplified_completeness_bound,
    amplified_soundness_bound,
    measurement_branch_operator,
    one_sided_amplify,
    qcph_to_qphpure_transform,
    simulation_completeness_bound,
    simulation_soundness_bound,
)
from qphlab.verifier import AcceptOperator, Circuit, Gate, Layout, QuantifiedGame, simulate_circuit


def _pad_state(v, size):
    out = np.zeros(size, dtype=complex)
    out[: v.size] = v
    return QState(out)


def _pad_density(m, size):
    out = np.zeros((size, size), dtype=complex)
    out[: m.shape[0], : m.shape[0]] = m
    return DensityOp(out)


def test_criterion_01_swap_test_formula(criterion):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for d in (2, 3, 4):
        circ = swap_test_circuit(2 if d > 2 else 1)
        size = 2 ** (2 if d > 2 else 1)
        for _ in range(100):
            a, b = random_state(d, rng).amplitudes, random_state(d, rng).amplitudes
            got = simulate_circuit(circ, [_pad_state(a, size), _pad_state(b, size)])
            worst = max(worst, abs(got - (0.5 + 0.5 * abs(np.vdot(a, b)) ** 2)))
            rho, sigma = random_density(d, rng).matrix, random_density(d, rng).matrix
            got = simulate_circuit(circ, [_pad_density(rho, size), _pad_density(sigma, size)])
            worst = max(worst, abs(got - (0.5 + 0.5 * np.trace(rho @ sigma).real)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 5
    criterion(1, "SWAP-test formula", ok, f"max error {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_apt_soundness(criterion):
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    worst = np.inf
    for n, m in ((1, 1), (1, 2), (2, 1)):
        for extra in (1, 2):
            layout = AptLayout.qubits(n, m, extra)
            for _ in range(500):
                phi = random_state(layout.bc_dim, rng).amplitudes
                psi = [random_state(2, rng).amplitudes for _ in range(n)]
                res = best_product_overlap(phi, layout)
                bound = 1 - (res.epsilon - res.gap) / (2 * m * n)
                worst = min(worst, bound + 1e-9 - apt_acceptance(layout, psi, phi))
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    layout = AptLayout.qubits(1, 1, 2)
    eps = best_product_overlap(bell, layout).epsilon
    bell_acc = apt_acceptance(layout, [random_state(2, rng).amplitudes], bell)
    equality = abs(bell_acc - 0.75) < 1e-10 and abs(bell_acc - (1 - eps / 2)) < 1e-10
    elapsed = time.perf_counter() - start
    ok = worst >= 0 and equality and elapsed < 120
    criterion(2, "APT soundness", ok, f"min slack {worst:.3e}, Bell {bell_acc:.12f}, {elapsed:.1f}s")
    assert ok


def _amp_base(kind):
    sym = swap_test_operator(2).matrix
    if kind == "yes":
        return AcceptOperator(0.1 * np.eye(4) + 0.8 * sym, (2, 2))
    return AcceptOperator(0.2 * np.eye(4) + 0.4 * sym, (2, 2))


def test_criterion_03_one_sided_amplification(criterion):
    c, s = 0.9, 0.6
    start = time.perf_counter()
    ok, notes = True, []
    # the toy bases have forall-exists values exactly c and s
    assert abs(quantum_game_value(QuantifiedGame(_amp_base("yes"), ("A", "E")), grid_points=2000).value - c) < 1e-9
    assert abs(quantum_game_value(QuantifiedGame(_amp_base("no"), ("A", "E")), grid_points=2000).value - s) < 1e-9
    for m in (2, 3):
        yes = quantum_game_value(one_sided_amplify(AmplifiedGameSpec(QuantifiedGame(_amp_base("yes"), ("A", "E")), c, s, m)))
        no = quantum_game_value(one_sided_amplify(AmplifiedGameSpec(QuantifiedGame(_amp_base("no"), ("A", "E")), c, s, m)))
        lo, hi = amplified_completeness_bound(c, s, m), amplified_soundness_bound(s, m, 1)
        ok &= yes.value >= lo - yes.gap and no.value <= hi + no.gap
        notes.append(f"m={m}: yes {yes.value:.4f}>={lo:.4f}, no {no.value:.4f}<={hi:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    criterion(3, "one-sided amplification", ok, "; ".join(notes) + f", {elapsed:.1f}s")
    assert ok


def _table_op(table):
    arr = np.asarray(table, dtype=float)
    return AcceptOperator(np.diag(arr.reshape(-1)), arr.shape)


def test_criterion_04_classical_to_pure_simulation(criterion):
    yes_table = [[0.95, 0.05], [0.1, 0.9]]
    no_table = [[0.1, 0.05], [0.9, 0.95]]
    start = time.perf_counter()
    ok, notes = True, []
    for m in (1, 2):
        yes_spec = SimulationGameSpec(_table_op(yes_table), (1, 1), m)
        no_spec = SimulationGameSpec(_table_op(no_table), (1, 1), m)
        c = classical_game_value(yes_spec.classical_game)
        s = classical_game_value(no_spec.classical_game)
        yes = quantum_game_value(qcph_to_qphpure_transform(yes_spec))
        no = quantum_game_value(qcph_to_qphpure_transform(no_spec))
        cp, sp = simulation_completeness_bound(c, m), simulation_soundness_bound(s, m, 1)
        ok &= yes.value >= cp - yes.gap and no.value <= sp + no.gap
        for spec in (yes_spec, no_spec):
            mat = measurement_branch_operator(spec).matrix
            off = np.max(np.abs(mat - np.diag(np.diag(mat))))
            ok &= off < 1e-12
        notes.append(f"m={m}: yes {yes.value:.4f}>={cp:.4f}, no {no.value:.4f}<={sp:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 600
    criterion(4, "classical-to-pure simulation", ok, "; ".join(notes) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_05_measurement_bound(criterion):
    rng = np.random.default_rng(5)
    start = time.perf_counter()
    worst = np.inf
    for d in (2, 4, 8):
        for _ in range(1000):
            psi = random_state(d, rng).amplitudes
            phi = nearby_state(psi, rng.uniform(0, 1.0), rng)
            proj = random_projector(d, int(rng.integers(1, d + 1)), rng)
            lhs, eps = projected_trace_gap(proj, psi, phi)
            worst = min(worst, 2 * eps + 1e-8 - lhs)
    elapsed = time.perf_counter() - start
    ok = worst >= 0 and elapsed < 10
    criterion(5, "measurement bound", ok, f"min slack {worst:.3e}, {elapsed:.1f}s")
    assert ok


def test_criterion_06_isolation_floor(criterion):
    start = time.perf_counter()
    ok, worst = True, np.inf
    for ell in (3, 4, 5):
        for w in (1, 2, 5, 2**ell):
            est = iso.isolation_frequency(isolation_instance(ell, w, 0), 100_000, seed=ell * 100 + w)
            ratio = est.lower(0.99) / iso.isolation_floor(ell)
            worst = min(worst, ratio)
            ok &= ratio >= 1
    # NO instances: witnesses reach only 1/2 < p2, and no hash draw may change that
    base = iso.witness_set_circuit(3, [0, 3, 5, 6])
    coin, out = base.num_wires, base.num_wires + 1
    gates = base.gates + (Gate("H", (coin,)), Gate("TOFFOLI", (base.layout.output, coin, out)))
    lay = Layout(base.layout.proofs, tuple(base.layout.ancilla) + (coin, out), out)
    no = iso.TqcmappInstance(Circuit(out + 1, gates, lay), "", Fraction(1, 2), Fraction(3, 4), 3)
    table = no.acceptance_table()
    never_yes = no.classify() == "no"
    for _, cons in iso.all_hash_draws(3):
        t = np.where(iso.constraint_mask(cons, 3), table, 0.0)
        never_yes &= bool(np.all(t <= float(no.p1)))
    empty = isolation_instance(3, 0, 0)
    empty_table = empty.acceptance_table()
    for _, cons in iso.all_hash_draws(3):
        never_yes &= not np.any(np.where(iso.constraint_mask(cons, 3), empty_table, 0.0) >= float(empty.p2))
    elapsed = time.perf_counter() - start
    ok &= never_yes and elapsed < 300
    criterion(6, "isolation floor", ok, f"min lower99/floor {worst:.1f}, NO preserved {never_yes}, {elapsed:.1f}s")
    assert ok


def test_criterion_07_approximate_bv(criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    exact_ok, noisy_ok, notes = True, True, []
    for n in range(4, 11):
        s = iso.bits_of(int(rng.integers(2**n)), n)
        exact = iso.NoisyDecisionOracle(eta=0.0)
        dist = exact.bv_distribution(iso.parity_table(s))
        draws = rng.choice(2**n, size=10_000, p=dist)
        exact_ok &= bool(np.all(draws == int(s, 2)))
        noisy = iso.NoisyDecisionOracle(eta=2.0**-n)
        dist = noisy.bv_distribution(iso.parity_table(s))
        hits = int(np.sum(rng.choice(2**n, size=10_000, p=dist) == int(s, 2)))
        lower = iso.FrequencyEstimate(hits, 10_000).lower(0.99)
        noisy_ok &= lower >= iso.approx_bv_bound(n)
        notes.append(f"n={n}:{lower:.3f}")
    # the gate-level decider at the same error rate
    for n in (4, 5, 6):
        s = iso.bits_of(int(rng.integers(2**n)), n)
        dist = iso.CircuitDecider(coins=n).bv_distribution(iso.parity_table(s))
        hits = int(np.sum(rng.choice(2**n, size=10_000, p=dist) == int(s, 2)))
        noisy_ok &= iso.FrequencyEstimate(hits, 10_000).lower(0.99) >= iso.approx_bv_bound(n)
    elapsed = time.perf_counter() - start
    ok = exact_ok and noisy_ok and elapsed < 120
    criterion(7, "approximate BV", ok, f"exact {exact_ok}, noisy lower99 " + " ".join(notes) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_08_qckl_pipeline(criterion):
    start = time.perf_counter()
    ell = 4
    verifier = iso.relative_witness_circuit(ell, ["0000", "0011", "1010"])
    decider = iso.CircuitDecider(coins=ell)
    yes = iso.qckl_trials("1", "0110", verifier, decider, 1_000_000, seed=8)
    no = iso.qckl_trials("0", "0110", verifier, decider, 1_000_000, seed=9)
    ey = iso.FrequencyEstimate(int(yes.sum()), yes.size)
    en = iso.FrequencyEstimate(int(no.sum()), no.size)
    bound = iso.qckl_bound(ell)
    elapsed = time.perf_counter() - start
    ok = ey.lower(0.99) >= bound and en.rate <= 1 / ell**4 + 1e-3 and elapsed < 900
    criterion(8, "QCKL pipeline", ok,
              f"yes lower99 {ey.lower():.4f} >= {bound:.4f}, no {en.rate:.5f} <= {1 / ell**4 + 1e-3:.5f}, {elapsed:.1f}s")
    assert ok


def _flat_value(table, prefix):
    values = {ys: float(table[ys]) for ys in product(*(range(d) for d in table.shape))}
    for level in reversed(range(table.ndim)):
        pick = max if prefix[level] == "E" else min
        grouped = {}
        for ys, v in values.items():
            grouped.setdefault(ys[:level], []).append(v)
        values = {k: pick(vs) for k, vs in grouped.items()}
    return values[()]


def test_criterion_09_solver_oracles(criterion):
    rng = np.random.default_rng(9)
    start = time.perf_counter()
    mismatches = games = 0
    for count in (1, 2, 3):
        for bits in product(range(1, 4), repeat=count):
            dims = tuple(2**b for b in bits)
            for prefix in product("EA", repeat=count):
                for table in (rng.random(dims), rng.integers(0, 2, size=dims).astype(float)):
                    acc = AcceptOperator(np.diag(table.reshape(-1)), dims, check=False)
                    got = classical_game_value(QuantifiedGame(acc, prefix, ("classical",)))
                    mismatches += got != _flat_value(table, prefix)
                    games += 1
    outside = 0
    for g in range(50):
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h @ h.conj().T
        w = np.linalg.eigvalsh(h)
        game = QuantifiedGame(AcceptOperator((h - w[0] * np.eye(4)) / (w[-1] - w[0]), (2, 2)), ("EA", "AE")[g % 2])
        cert = quantum_game_value(game)
        heur = quantum_game_value(game, mode="heuristic", rng=rng)
        outside += not (cert.value - cert.gap - 1e-9 <= heur.value <= cert.value + cert.gap + 1e-9)
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and outside == 0 and elapsed < 300
    criterion(9, "game-solver oracles", ok,
              f"{games} classical games, {mismatches} mismatches; {outside}/50 heuristic outside bracket, {elapsed:.1f}s")
    assert ok


def test_criterion_10_determinism(criterion, tmp_path):
    start = time.perf_counter()
    same = {}
    for name in sorted(EXPERIMENTS):
        outputs = []
        for tag, workers in (("a", 1), ("b", 1), ("c", 8)):
            path = tmp_path / f"{name}-{tag}.csv"
            code = cli.main([name, "--seed", "123", "--workers", str(workers), "--out", str(path)])
            assert code == 0, name
            outputs.append(path.read_bytes())
        same[name] = outputs[0] == outputs[1] == outputs[2]
    elapsed = time.perf_counter() - start
    ok = all(same.values())
    bad = [k for k, v in same.items() if not v]
    criterion(10, "determinism", ok, f"{len(same)} experiments, differing: {bad or 'none'}, {elapsed:.1f}s")
    assert ok
