"""Qubit circuits, acceptance operators and quantified proof games.

A verifier circuit acts on ``num_wires`` qubits. Wires are split into proof
registers and ancillas (the two must partition the wire set); ancillas start
in |0>, and the verifier accepts when the designated output wire reads 1.
Wire 0 is the most significant qubit in every state vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from .linalg import DensityOp, HermitianOp, QState, is_hermitian

DEFAULT_MAX_DIM = 2**14
PSD_TOL = 1e-9

_S2 = 1 / math.sqrt(2)
_ONE_QUBIT = {
    "H": np.array([[_S2, _S2], [_S2, -_S2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "S": np.diag([1, 1j]).astype(complex),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex),
}


def _controlled(u: np.ndarray, controls: int) -> np.ndarray:
    n = u.shape[0] * 2**controls
    out = np.eye(n, dtype=complex)
    out[-u.shape[0] :, -u.shape[0] :] = u
    return out


_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
GATES = {
    **_ONE_QUBIT,
    "CNOT": _controlled(_ONE_QUBIT["X"], 1),
    "CSWAP": _controlled(_SWAP, 1),
    "TOFFOLI": _controlled(_ONE_QUBIT["X"], 2),
}
GATE_ARITY = {name: int(round(math.log2(u.shape[0]))) for name, u in GATES.items()}
# S and T are the only non-self-inverse gates; their inverses are powers of themselves
_INVERSE_REPEAT = {"S": 3, "T": 7}


class CircuitError(ValueError):
    pass


class DimensionCapError(ValueError):
    pass


@dataclass(frozen=True)
class Gate:
    name: str
    targets: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.name not in GATES:
            raise CircuitError(f"unknown gate {self.name!r}")
        if len(self.targets) != GATE_ARITY[self.name]:
            raise CircuitError(f"{self.name} takes {GATE_ARITY[self.name]} wires, got {self.targets}")
        if len(set(self.targets)) != len(self.targets):
            raise CircuitError(f"{self.name} targets must be distinct: {self.targets}")


@dataclass(frozen=True)
class Layout:
    proofs: tuple[tuple[int, ...], ...]
    ancilla: tuple[int, ...]
    output: int
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "proofs", tuple(tuple(int(w) for w in p) for p in self.proofs))
        object.__setattr__(self, "ancilla", tuple(int(w) for w in self.ancilla))
        object.__setattr__(self, "output", int(self.output))
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
            if len(self.names) != len(self.proofs):
                raise CircuitError("one name per proof register required")

    @property
    def proof_wires(self) -> tuple[int, ...]:
        return tuple(w for p in self.proofs for w in p)

    @property
    def proof_dims(self) -> tuple[int, ...]:
        return tuple(2 ** len(p) for p in self.proofs)


@dataclass(frozen=True)
class Circuit:
    num_wires: int
    gates: tuple[Gate, ...]
    layout: Layout

    def __post_init__(self):
        gates = tuple(g if isinstance(g, Gate) else Gate(g[0], tuple(g[1])) for g in self.gates)
        object.__setattr__(self, "gates", gates)
        n = self.num_wires
        if n < 1:
            raise CircuitError("a circuit needs at least one wire")
        for g in gates:
            if any(not 0 <= t < n for t in g.targets):
                raise CircuitError(f"gate {g.name}{g.targets} out of range for {n} wires")
        lay = self.layout
        if any(len(p) == 0 for p in lay.proofs):
            raise CircuitError("empty proof register")
        used = list(lay.proof_wires) + list(lay.ancilla)
        if sorted(used) != list(range(n)):
            raise CircuitError(f"proof and ancilla wires must partition range({n}); got {sorted(used)}")
        if not 0 <= lay.output < n:
            raise CircuitError(f"output wire {lay.output} out of range")

    def inverse(self) -> "Circuit":
        gates = []
        for g in reversed(self.gates):
            gates.extend([g] * _INVERSE_REPEAT.get(g.name, 1))
        return Circuit(self.num_wires, tuple(gates), self.layout)

    # JSON wire format ------------------------------------------------------
    def to_dict(self) -> dict:
        lay = {
            "proofs": [list(p) for p in self.layout.proofs],
            "ancilla": list(self.layout.ancilla),
            "output": self.layout.output,
        }
        if self.layout.names is not None:
            lay["names"] = list(self.layout.names)
        return {
            "wires": self.num_wires,
            "gates": [{"g": g.name, "t": list(g.targets)} for g in self.gates],
            "layout": lay,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        try:
            lay = data["layout"]
            layout = Layout(
                proofs=lay["proofs"], ancilla=lay.get("ancilla", []), output=lay["output"], names=lay.get("names")
            )
            gates = tuple(Gate(g["g"], tuple(g["t"])) for g in data["gates"])
            return cls(int(data["wires"]), gates, layout)
        except (KeyError, TypeError) as exc:
            raise CircuitError(f"malformed circuit description: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# state-vector simulation


def apply_gates(states: np.ndarray, gates: Iterable[Gate], num_wires: int) -> np.ndarray:
    """Apply gates to a batch of state vectors stored as columns of ``states``."""
    batch = states.shape[1]
    t = states.reshape((2,) * num_wires + (batch,))
    for g in gates:
        k = len(g.targets)
        u = GATES[g.name].reshape((2,) * (2 * k))
        t = np.tensordot(u, t, axes=(list(range(k, 2 * k)), list(g.targets)))
        t = np.moveaxis(t, list(range(k)), list(g.targets))
    return t.reshape(2**num_wires, batch)


def _proof_column_indices(circuit: Circuit) -> np.ndarray:
    """Full-register basis index for every proof basis state (ancillas at 0)."""
    wires = circuit.layout.proof_wires
    n = circuit.num_wires
    nproof = len(wires)
    cols = np.arange(2**nproof)
    full = np.zeros_like(cols)
    for pos, w in enumerate(wires):
        bit = (cols >> (nproof - 1 - pos)) & 1
        full |= bit << (n - 1 - w)
    return full


def _output_mask(circuit: Circuit) -> np.ndarray:
    n = circuit.num_wires
    idx = np.arange(2**n)
    return ((idx >> (n - 1 - circuit.layout.output)) & 1).astype(bool)


def simulate_circuit(circuit: Circuit, proofs: Sequence["ProofLike"]) -> float:
    """Acceptance probability by direct simulation of the circuit.

    Pure and classical proofs are run as a state vector; if any proof is a
    density operator the whole register is evolved as ``U rho U^dagger``.
    """
    dims = circuit.layout.proof_dims
    parts = _as_proof_parts(proofs, dims)
    n = circuit.num_wires
    cols = _proof_column_indices(circuit)
    mask = _output_mask(circuit)
    if all(p.ndim == 1 for p in parts):
        vec = parts[0]
        for p in parts[1:]:
            vec = np.kron(vec, p)
        psi = np.zeros(2**n, dtype=complex)
        psi[cols] = vec
        out = apply_gates(psi[:, None], circuit.gates, n)[:, 0]
        return float(np.clip(np.sum(np.abs(out[mask]) ** 2), 0.0, 1.0))
    rho = None
    for p in parts:
        m = np.outer(p, p.conj()) if p.ndim == 1 else p
        rho = m if rho is None else np.kron(rho, m)
    full = np.zeros((2**n, 2**n), dtype=complex)
    full[np.ix_(cols, cols)] = rho
    left = apply_gates(full, circuit.gates, n)
    evolved = apply_gates(left.conj().T.copy(), circuit.gates, n)
    return float(np.clip(np.real(np.trace(evolved[np.ix_(mask, mask)])), 0.0, 1.0))


def basis_acceptance(circuit: Circuit, bits: str) -> float:
    """Acceptance probability for a classical input filling all proof wires."""
    nproof = len(circuit.layout.proof_wires)
    if len(bits) != nproof:
        raise CircuitError(f"expected {nproof} input bits, got {len(bits)}")
    n = circuit.num_wires
    psi = np.zeros((2**n, 1), dtype=complex)
    psi[_proof_column_indices(circuit)[int(bits, 2)], 0] = 1.0
    out = apply_gates(psi, circuit.gates, n)[:, 0]
    return float(np.clip(np.sum(np.abs(out[_output_mask(circuit)]) ** 2), 0.0, 1.0))


# ---------------------------------------------------------------------------
# acceptance operators


@dataclass(frozen=True, eq=False)
class AcceptOperator:
    """Hermitian ``0 <= M <= I`` over an ordered list of proof registers."""

    matrix: np.ndarray
    dims: tuple[int, ...]
    names: tuple[str, ...]

    def __init__(self, matrix, dims: Sequence[int], names: Sequence[str] | None = None, check: bool = True):
        mat = np.asarray(matrix, dtype=complex)
        dims = tuple(int(d) for d in dims)
        if mat.shape != (int(np.prod(dims)),) * 2:
            raise ValueError(f"matrix shape {mat.shape} does not match register dims {dims}")
        if check:
            if not is_hermitian(mat, PSD_TOL):
                raise ValueError("acceptance operator is not Hermitian")
            ev = np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))
            if ev[0] < -PSD_TOL or ev[-1] > 1 + PSD_TOL:
                raise ValueError(f"eigenvalues [{ev[0]:.3g}, {ev[-1]:.3g}] outside [0, 1]")
        mat = 0.5 * (mat + mat.conj().T)
        mat.flags.writeable = False
        names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(len(dims)))
        if len(names) != len(dims):
            raise ValueError("one name per register required")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "names", names)

    @property
    def op(self) -> HermitianOp:
        return HermitianOp(self.matrix, self.dims)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def complement(self) -> "AcceptOperator":
        return AcceptOperator(np.eye(self.dim) - self.matrix, self.dims, self.names, check=False)

    def __repr__(self) -> str:
        return f"AcceptOperator(dims={self.dims}, names={self.names})"


def accept_operator_from_circuit(circuit: Circuit, max_dim: int = DEFAULT_MAX_DIM) -> AcceptOperator:
    """Compile a circuit into its acceptance operator on the proof registers.

    With ``W`` the isometry preparing ancillas in |0> and running the circuit,
    ``M = W^dagger (|1><1|_out (x) I) W``.
    """
    nproof = len(circuit.layout.proof_wires)
    if 2**nproof > max_dim or 2**circuit.num_wires > max_dim * 64:
        raise DimensionCapError(f"circuit too large: {nproof} proof qubits, {circuit.num_wires} wires")
    n = circuit.num_wires
    cols = _proof_column_indices(circuit)
    start = np.zeros((2**n, cols.size), dtype=complex)
    start[cols, np.arange(cols.size)] = 1.0
    w = apply_gates(start, circuit.gates, n)
    w1 = w[_output_mask(circuit)]
    mat = w1.conj().T @ w1
    names = circuit.layout.names
    return AcceptOperator(mat, circuit.layout.proof_dims, names)


ProofLike = Union[QState, DensityOp, str, np.ndarray]


def _as_proof_parts(proofs: Sequence[ProofLike], dims: Sequence[int]) -> list[np.ndarray]:
    if len(proofs) != len(dims):
        raise ValueError(f"expected {len(dims)} proofs, got {len(proofs)}")
    parts = []
    for p, d in zip(proofs, dims):
        if isinstance(p, str):
            if 2 ** len(p) != d:
                raise ValueError(f"bit string {p!r} does not fit a register of dim {d}")
            v = np.zeros(d, dtype=complex)
            v[int(p, 2)] = 1.0
            parts.append(v)
        elif isinstance(p, QState):
            if p.dim != d:
                raise ValueError(f"state of dim {p.dim} does not fit a register of dim {d}")
            parts.append(np.asarray(p.amplitudes))
        elif isinstance(p, HermitianOp):
            if p.dim != d:
                raise ValueError(f"operator of dim {p.dim} does not fit a register of dim {d}")
            parts.append(np.asarray(p.matrix))
        else:
            arr = np.asarray(p, dtype=complex)
            if arr.shape[0] != d:
                raise ValueError(f"proof of dim {arr.shape[0]} does not fit a register of dim {d}")
            parts.append(arr)
    return parts


def accept_probability(M: AcceptOperator, proofs: Sequence[ProofLike]) -> float:
    """``Tr(M * (proof_1 (x) ... (x) proof_k))`` clipped to [0, 1]."""
    parts = _as_proof_parts(proofs, M.dims)
    if all(isinstance(p, str) for p in proofs):
        idx = 0
        for p, d in zip(proofs, M.dims):
            idx = idx * d + int(p, 2)
        return float(np.clip(M.matrix[idx, idx].real, 0.0, 1.0))
    if all(p.ndim == 1 for p in parts):
        vec = parts[0]
        for p in parts[1:]:
            vec = np.kron(vec, p)
        val = np.vdot(vec, M.matrix @ vec).real
    else:
        rho = None
        for p in parts:
            m = np.outer(p, p.conj()) if p.ndim == 1 else p
            rho = m if rho is None else np.kron(rho, m)
        val = np.real(np.sum(M.matrix * rho.T))
    return float(np.clip(val, 0.0, 1.0))


def threshold_count(m: int, t: float) -> int:
    """Minimum number of accepting runs out of ``m`` for threshold fraction ``t``."""
    # ties at exactly t*m accept; the epsilon absorbs float error such as 3 * (2/3)
    return min(m, max(0, math.ceil(t * m - 1e-9)))


def binomial_tail(p: float, m: int, t: float) -> float:
    k0 = threshold_count(m, t)
    return float(sum(math.comb(m, j) * p**j * (1 - p) ** (m - j) for j in range(k0, m + 1)))


def parallel_repetition(
    M: AcceptOperator, m: int, t: float, max_dim: int = DEFAULT_MAX_DIM
) -> AcceptOperator:
    """Run ``M`` on ``m`` copies of its registers and accept on >= ceil(t*m) passes.

    Registers are copy-major: all of copy 1's registers, then copy 2's, ...
    Built in the eigenbasis of ``M``, where the operator is diagonal with the
    Poisson-binomial tail of the per-copy eigenvalues.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0.0 <= t <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    total = M.dim**m
    if total > max_dim:
        raise DimensionCapError(f"{m} copies of dim {M.dim} exceed cap {max_dim}")
    k0 = threshold_count(m, t)
    lam, u = np.linalg.eigh(M.matrix)
    lam = np.clip(lam, 0.0, 1.0)
    d = M.dim
    # dist[..., c]: probability that exactly c of the copies so far accepted
    dist = np.ones((1, 1))
    for _ in range(m):
        acc = dist[:, None, :] * lam[None, :, None]
        rej = dist[:, None, :] * (1 - lam)[None, :, None]
        new = np.zeros((dist.shape[0], d, dist.shape[1] + 1))
        new[..., :-1] += rej
        new[..., 1:] += acc
        dist = new.reshape(-1, dist.shape[1] + 1)
    tail = dist[:, k0:].sum(axis=1)
    big_u = u
    for _ in range(m - 1):
        big_u = np.kron(big_u, u)
    mat = (big_u * tail[None, :]) @ big_u.conj().T
    names = tuple(f"{nm}#{j}" for j in range(m) for nm in M.names)
    return AcceptOperator(mat, M.dims * m, names)


def parallel_repetition_by_subsets(M: AcceptOperator, m: int, t: float) -> np.ndarray:
    """Direct subset expansion of :func:`parallel_repetition` (for checking)."""
    from itertools import product

    k0 = threshold_count(m, t)
    eye = np.eye(M.dim)
    out = np.zeros((M.dim**m,) * 2, dtype=complex)
    for pattern in product((0, 1), repeat=m):
        if sum(pattern) < k0:
            continue
        term = np.ones((1, 1))
        for bit in pattern:
            term = np.kron(term, M.matrix if bit else eye - M.matrix)
        out += term
    return out


# ---------------------------------------------------------------------------
# quantified games

_QUANT = {"E": "E", "A": "A", "∃": "E", "∀": "A", "exists": "E", "forall": "A"}
PROOF_KINDS = ("classical", "pure", "mixed")


@dataclass(frozen=True)
class QuantifiedGame:
    """Acceptance operator plus a quantifier (``"E"``/``"A"``) per proof register."""

    accept: AcceptOperator
    prefix: tuple[str, ...]
    kinds: tuple[str, ...] = field(default=())

    def __post_init__(self):
        try:
            prefix = tuple(_QUANT[q] for q in self.prefix)
        except KeyError as exc:
            raise ValueError(f"unknown quantifier {exc}") from None
        object.__setattr__(self, "prefix", prefix)
        kinds = tuple(self.kinds) or ("pure",) * len(prefix)
        if len(kinds) == 1 and len(prefix) > 1:
            kinds = kinds * len(prefix)
        object.__setattr__(self, "kinds", kinds)
        if len(prefix) != len(self.accept.dims):
            raise ValueError(f"prefix length {len(prefix)} != {len(self.accept.dims)} proof registers")
        if len(kinds) != len(prefix) or any(k not in PROOF_KINDS for k in kinds):
            raise ValueError(f"bad proof kinds {kinds}")

    @property
    def dims(self) -> tuple[int, ...]:
        return self.accept.dims

    def with_operator(self, accept: AcceptOperator) -> "QuantifiedGame":
        return QuantifiedGame(accept, self.prefix, self.kinds)


def alternating_prefix(k: int, first: str) -> tuple[str, ...]:
    other = {"E": "A", "A": "E"}
    q = _QUANT[first]
    out = []
    for _ in range(k):
        out.append(q)
        q = other[q]
    return tuple(out)
