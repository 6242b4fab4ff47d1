from itertools import product
from math import comb

import numpy as np
import pytest

from qphlab.games import classical_game_value, quantum_game_value
from qphlab.linalg import random_state
from qphlab.product_tests import apt_acceptance, swap_test_operator
from qphlab.transforms import (
    AmplifiedGameSpec,
    SimulationGameSpec,
    amplified_completeness_bound,
    amplified_honest_proof,
    amplified_soundness_bound,
    default_copies,
    measurement_branch_diagonal,
    measurement_branch_operator,
    measurement_reject_bound,
    one_sided_amplify,
    qcph_honest_proof,
    qcph_to_qphpure_transform,
    simulation_completeness_bound,
    simulation_soundness_bound,
)
from qphlab.verifier import AcceptOperator, QuantifiedGame, accept_probability, binomial_tail, threshold_count


def toy_base(strength=0.8, floor=0.1):
    return AcceptOperator(floor * np.eye(4) + strength * swap_test_operator(2).matrix, (2, 2))


def table_op(table):
    arr = np.asarray(table, dtype=float)
    return AcceptOperator(np.diag(arr.reshape(-1)), arr.shape)


def in_unit_interval(op):
    w = np.linalg.eigvalsh(op.matrix)
    return w[0] > -1e-9 and w[-1] < 1 + 1e-9


def poisson_binomial_tail(ps, t):
    m = len(ps)
    total = 0.0
    for outcome in product((0, 1), repeat=m):
        if sum(outcome) >= threshold_count(m, t):
            total += np.prod([p if o else 1 - p for p, o in zip(ps, outcome)])
    return total


def test_spec_validation():
    base = QuantifiedGame(toy_base(), ("A", "E"))
    with pytest.raises(ValueError):
        AmplifiedGameSpec(base, 0.5, 0.6, 2)
    with pytest.raises(ValueError):
        AmplifiedGameSpec(QuantifiedGame(toy_base(), ("E", "A")), 0.9, 0.6, 2)
    with pytest.raises(ValueError):
        AmplifiedGameSpec(QuantifiedGame(AcceptOperator(np.eye(2), (2,)), ("E",)), 0.9, 0.6, 2)
    with pytest.raises(ValueError):
        SimulationGameSpec(table_op(np.ones(2)), (1,), 1)
    with pytest.raises(ValueError):
        SimulationGameSpec(table_op(np.ones((2, 2))), (1, 2), 1)


def test_default_copies_respects_cap():
    assert default_copies(1, 0.9, 0.6, (2, 2)) == 6
    assert default_copies(1, 0.9, 0.6, (2, 2), max_dim=2**7) == 3


def test_amplified_operator_in_range_and_honest_bound(rng):
    for m in (1, 2, 3):
        spec = AmplifiedGameSpec(QuantifiedGame(toy_base(), ("A", "E")), 0.9, 0.6, m)
        game = one_sided_amplify(spec)
        assert in_unit_interval(game.accept)
        assert game.dims == (2, 4**m)
        for _ in range(5):
            psi = random_state(2, rng).amplitudes
            got = accept_probability(game.accept, amplified_honest_proof(spec, [psi, psi]))
            assert got >= amplified_completeness_bound(0.9, 0.6, m) - 1e-9
            # APT branch is certain on honest input; the rest is the binomial tail
            p = accept_probability(toy_base(), [psi, psi])
            assert abs(got - (0.5 + 0.5 * binomial_tail(p, m, spec.threshold))) < 1e-10


def test_amplified_pairing_of_bundles_and_copies(rng):
    m = 2
    spec = AmplifiedGameSpec(QuantifiedGame(toy_base(0.6, 0.2), ("A", "E")), 0.8, 0.5, m)
    game = one_sided_amplify(spec)
    for _ in range(10):
        a = random_state(2, rng).amplitudes
        bs = [random_state(2, rng).amplitudes for _ in range(m)]
        cs = [random_state(2, rng).amplitudes for _ in range(m)]
        bc = np.kron(np.kron(bs[0], bs[1]), np.kron(cs[0], cs[1]))
        got = accept_probability(game.accept, [a, bc])
        ps = [accept_probability(toy_base(0.6, 0.2), [b, c]) for b, c in zip(bs, cs)]
        want = 0.5 * apt_acceptance(spec.layout, [a], bc) + 0.5 * poisson_binomial_tail(ps, spec.threshold)
        assert abs(got - want) < 1e-10


def test_amplified_perfect_base_accepts_honest(rng):
    spec = AmplifiedGameSpec(QuantifiedGame(AcceptOperator(np.eye(4), (2, 2)), ("A", "E")), 1.0, 0.5, 2)
    game = one_sided_amplify(spec)
    psi = random_state(2, rng).amplitudes
    assert abs(accept_probability(game.accept, amplified_honest_proof(spec, [psi, psi])) - 1) < 1e-12


def test_bound_shapes():
    assert abs(amplified_completeness_bound(0.9, 0.6, 2) - (0.5 + 0.5 * (1 - np.exp(-0.09)))) < 1e-15
    assert amplified_soundness_bound(0.6, 2) == 1 - 1 / 8 + 0.6
    assert simulation_completeness_bound(1.0, 2) == 0.875
    assert simulation_soundness_bound(0.0, 2) == 1 - 1 / 8


def loop_diagonal(table, m):
    """Reference branch values written with explicit loops, k = 2."""
    out = []
    for x1 in range(2):
        for copies in product(range(2), repeat=m):
            for x2 in range(2):
                out.append(1.0 if any(c != x1 for c in copies) else table[x1][x2])
    return np.array(out)


def test_measurement_branch_matches_loops():
    table = [[0.95, 0.05], [0.1, 0.9]]
    for m in (1, 2, 3):
        spec = SimulationGameSpec(table_op(table), (1, 1), m)
        assert np.array_equal(measurement_branch_diagonal(spec), loop_diagonal(table, m))


def test_measurement_branch_four_proofs():
    rng = np.random.default_rng(3)
    table = rng.random((2, 2, 2, 2))
    spec = SimulationGameSpec(table_op(table), (1, 1, 1, 1), 1)
    assert spec.universal == (0, 2)
    diag = measurement_branch_diagonal(spec).reshape(2, 2, 2, 2, 2, 2, 2)
    for x1, x2, x3, c1, c2, c3, x4 in product(range(2), repeat=7):
        v = diag[x1, x2, x3, c1, c2, c3, x4]
        if c1 != x1:
            assert v == 1.0
        elif c2 != x2:
            assert v == 0.0
        elif c3 != x3:
            assert v == 1.0
        else:
            assert v == table[x1, x2, x3, x4]


def test_measurement_branch_exactly_diagonal():
    spec = SimulationGameSpec(table_op([[1, 0], [0, 1]]), (1, 1), 2)
    mat = measurement_branch_operator(spec).matrix
    assert np.max(np.abs(mat - np.diag(np.diag(mat)))) < 1e-12
    game = qcph_to_qphpure_transform(spec)
    assert in_unit_interval(game.accept) and game.prefix == ("A", "E")


def test_equality_game_honest_value():
    spec = SimulationGameSpec(table_op([[1, 0], [0, 1]]), (1, 1), 2)
    c = classical_game_value(spec.classical_game)
    assert c == 1
    res = quantum_game_value(qcph_to_qphpure_transform(spec), grid_points=2000)
    assert res.value >= simulation_completeness_bound(c, 2) - res.gap
    assert simulation_completeness_bound(c, 2) == 0.875


def test_reject_bound_on_superposed_universal_proof(rng):
    table = [[0.95, 0.05], [0.1, 0.9]]
    for m in (1, 2, 3):
        spec = SimulationGameSpec(table_op(table), (1, 1), m)
        c = classical_game_value(spec.classical_game)
        meas = measurement_branch_operator(spec)
        for _ in range(200):
            psi = random_state(2, rng).amplitudes
            reject = 1 - accept_probability(meas, qcph_honest_proof(spec, [psi]))
            p = float(np.max(np.abs(psi) ** 2))
            assert reject <= measurement_reject_bound(p, c, m) + 1e-9
            assert measurement_reject_bound(p, c, m) <= 2.0**-m + 1 - c + 1e-9


def test_honest_proof_layout():
    spec = SimulationGameSpec(table_op([[0.2, 0.9], [0.7, 0.1]]), (1, 1), 2)
    proofs = qcph_honest_proof(spec, ["1"])
    # best answer to x1 = 1 is x2 = 0; last register holds two copies of x1 then x2
    assert np.allclose(proofs[1], np.eye(8)[0b110])


def test_gap_is_positive_for_perfect_verifiers():
    for m in (3, 4):
        gap = simulation_completeness_bound(1.0, m) - simulation_soundness_bound(0.0, m)
        assert gap > 0 and gap >= 1 / (16 * m) - 1e-12
    # and the measured game values respect the same ordering at m = 3
    yes = SimulationGameSpec(table_op([[1, 0], [0, 1]]), (1, 1), 3)
    no = SimulationGameSpec(table_op(np.zeros((2, 2))), (1, 1), 3)
    yv = quantum_game_value(qcph_to_qphpure_transform(yes), grid_points=1000)
    nv = quantum_game_value(qcph_to_qphpure_transform(no), grid_points=1000)
    assert yv.value >= simulation_completeness_bound(1.0, 3) - yv.gap
    assert nv.value <= simulation_soundness_bound(0.0, 3) + nv.gap
    assert yv.value > nv.value
