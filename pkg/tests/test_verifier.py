import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qphlab.linalg import QState, random_density, random_state
from qphlab.verifier import (
    GATES,
    AcceptOperator,
    Circuit,
    CircuitError,
    DimensionCapError,
    Gate,
    Layout,
    QuantifiedGame,
    accept_operator_from_circuit,
    accept_probability,
    alternating_prefix,
    binomial_tail,
    parallel_repetition,
    parallel_repetition_by_subsets,
    simulate_circuit,
    threshold_count,
)

MINUS = np.array([1, -1]) / np.sqrt(2)


def one_qubit(gates=()):
    return Circuit(1, tuple(gates), Layout([[0]], [], 0))


def test_direct_measurement_operator():
    m = accept_operator_from_circuit(one_qubit())
    assert np.allclose(m.matrix, np.diag([0, 1]))


def test_hadamard_then_measure():
    m = accept_operator_from_circuit(one_qubit([Gate("H", (0,))]))
    assert np.allclose(m.matrix, np.outer(MINUS, MINUS), atol=1e-12)


def test_accept_probability_examples():
    proj1 = AcceptOperator(np.diag([0, 1]), (2,))
    assert accept_probability(proj1, ["1"]) == 1.0
    minus = AcceptOperator(np.outer(MINUS, MINUS), (2,))
    assert abs(accept_probability(minus, [QState.basis(0, 2)]) - 0.5) < 1e-12
    ident = AcceptOperator(np.eye(4), (2, 2))
    assert abs(accept_probability(ident, ["0", QState(MINUS)]) - 1) < 1e-12


def test_accept_probability_dimension_mismatch():
    with pytest.raises(ValueError):
        accept_probability(AcceptOperator(np.eye(2), (2,)), ["01"])


def test_accept_operator_rejects_out_of_range():
    with pytest.raises(ValueError):
        AcceptOperator(np.diag([0.5, 1.2]), (2,))


def test_circuit_validation():
    with pytest.raises(CircuitError):
        Circuit(2, (Gate("H", (2,)),), Layout([[0]], [1], 0))
    with pytest.raises(CircuitError):
        Circuit(2, (), Layout([[0]], [], 0))
    with pytest.raises(CircuitError):
        Gate("CNOT", (1, 1))
    with pytest.raises(CircuitError):
        Gate("RX", (0,))


def random_circuit(rng, wires=4, depth=12):
    names = sorted(GATES)
    gates = []
    for _ in range(depth):
        g = names[rng.integers(len(names))]
        arity = {"CNOT": 2, "CSWAP": 3, "TOFFOLI": 3}.get(g, 1)
        gates.append(Gate(g, tuple(rng.choice(wires, size=arity, replace=False).tolist())))
    layout = Layout([[0], [1, 2]], [3], int(rng.integers(wires)))
    return Circuit(wires, tuple(gates), layout)


def test_compiled_operator_matches_simulation(rng):
    for _ in range(10):
        c = random_circuit(rng)
        m = accept_operator_from_circuit(c)
        w = np.linalg.eigvalsh(m.matrix)
        assert w[0] > -1e-9 and w[-1] < 1 + 1e-9
        for _ in range(5):
            proofs = [random_state(2, rng), random_state(4, rng)]
            assert abs(accept_probability(m, proofs) - simulate_circuit(c, proofs)) < 1e-10
        mixed = [random_density(2, rng), random_density(4, rng)]
        assert abs(accept_probability(m, mixed) - simulate_circuit(c, mixed)) < 1e-10


def test_inverse_undoes_circuit(rng):
    c = random_circuit(rng, depth=20)
    both = Circuit(c.num_wires, c.gates + c.inverse().gates, c.layout)
    m = accept_operator_from_circuit(both)
    direct = accept_operator_from_circuit(Circuit(c.num_wires, (), c.layout))
    assert np.allclose(m.matrix, direct.matrix, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_circuit_json_round_trip(seed):
    c = random_circuit(np.random.default_rng(seed))
    text = c.to_json()
    again = Circuit.from_json(text)
    assert again.to_json() == text
    assert json.loads(text)["wires"] == 4


def test_circuit_json_malformed():
    with pytest.raises(CircuitError):
        Circuit.from_dict({"wires": 1, "gates": []})


def test_threshold_ceiling():
    assert threshold_count(3, 2 / 3) == 2
    assert threshold_count(4, 0.5) == 2
    assert threshold_count(5, 0.5) == 3


def test_binomial_tail_example():
    assert abs(binomial_tail(0.9, 3, 2 / 3) - 0.972) < 1e-12


def test_parallel_repetition_all_must_accept(rng):
    m = AcceptOperator(np.diag([0.3, 0.8]), (2,))
    rep = parallel_repetition(m, 2, 1.0)
    assert np.allclose(rep.matrix, np.kron(m.matrix, m.matrix), atol=1e-12)


def test_parallel_repetition_matches_subsets_and_tail(rng):
    g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    h = g @ g.conj().T
    m = AcceptOperator(h / (np.linalg.eigvalsh(h)[-1] * 1.01), (2,))
    for copies in range(1, 7):
        for t in (0.0, 0.5, 2 / 3, 1.0):
            rep = parallel_repetition(m, copies, t)
            assert np.allclose(rep.matrix, parallel_repetition_by_subsets(m, copies, t), atol=1e-10)
            psi = random_state(2, rng)
            p = accept_probability(m, [psi])
            got = accept_probability(rep, [psi] * copies)
            assert abs(got - binomial_tail(p, copies, t)) < 1e-10


def test_repetition_tail_meets_concentration():
    c, s = 0.9, 0.6
    for copies in range(4, 65):
        assert binomial_tail(c, copies, (c + s) / 2) >= 1 - np.exp(-((c - s) ** 2) * copies / 2)


def test_parallel_repetition_cap():
    m = AcceptOperator(np.eye(4) * 0.5, (2, 2))
    with pytest.raises(DimensionCapError):
        parallel_repetition(m, 8, 0.5, max_dim=2**10)


def test_quantified_game_validation():
    m = AcceptOperator(np.eye(4), (2, 2))
    with pytest.raises(ValueError):
        QuantifiedGame(m, ("E",))
    with pytest.raises(ValueError):
        QuantifiedGame(m, ("E", "X"))
    g = QuantifiedGame(m, ("∃", "∀"))
    assert g.prefix == ("E", "A") and g.kinds == ("pure", "pure")
    assert alternating_prefix(4, "A") == ("A", "E", "A", "E")
