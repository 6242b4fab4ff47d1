"""Witness isolation and search-to-decision for classical-witness verifiers.

An instance pairs a verifier circuit with a fixed input string; its last
proof register is the ``ell``-bit witness. Acceptance probabilities of
witnesses are always computed exactly by state-vector simulation.

Isolation draws ``k`` uniformly from ``1..ell+1`` and an affine map
``h(d) = A d + b`` over GF(2) with ``k`` output bits, keeping only witnesses
with ``h(d) = 0``. A constraint row ``[a_1..a_ell, b]`` demands
``<a, d> = b (mod 2)``.

The search step recovers a unique witness ``s`` with one Bernstein-Vazirani
query to a decision procedure for ``z -> [phi_z has a witness]``, where
``phi_z`` adds the constraint ``<z, d> = 1``.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.stats import beta

from .verifier import Circuit, Gate, Layout, _output_mask, _proof_column_indices, apply_gates

UNARY_LIMIT = 1 << 20
MAX_ELL = 16
TRIAL_BLOCK = 4096


# ---------------------------------------------------------------------------
# small helpers


def bits_of(value: int, width: int) -> str:
    return format(value, f"0{width}b") if width else ""


def _bit_matrix(width: int) -> np.ndarray:
    """Row ``v`` holds the bits of ``v``, most significant first."""
    v = np.arange(2**width)
    return ((v[:, None] >> np.arange(width - 1, -1, -1)[None, :]) & 1).astype(np.int64)


@lru_cache(maxsize=16)
def parity_matrix(width: int) -> np.ndarray:
    """``P[z, d] = <z, d> mod 2``."""
    b = _bit_matrix(width)
    out = (b @ b.T) % 2
    out.flags.writeable = False
    return out


def _as_fraction(p) -> Fraction:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, (tuple, list)):
        num, den = p
        return Fraction(int(num), int(den))
    return Fraction(p).limit_denominator(UNARY_LIMIT)


def clopper_pearson_lower(successes: int, trials: int, confidence: float = 0.99) -> float:
    """One-sided exact binomial lower confidence bound."""
    if successes <= 0:
        return 0.0
    return float(beta.ppf(1.0 - confidence, successes, trials - successes + 1))


def clopper_pearson_upper(successes: int, trials: int, confidence: float = 0.99) -> float:
    if successes >= trials:
        return 1.0
    return float(beta.ppf(confidence, successes + 1, trials - successes))


# ---------------------------------------------------------------------------
# circuit builders


def _and_into(controls: Sequence[int], target: int, scratch: Sequence[int]) -> list[Gate]:
    """XOR the AND of ``controls`` into ``target``; scratch wires return to 0."""
    c = list(controls)
    if len(c) == 1:
        return [Gate("CNOT", (c[0], target))]
    if len(c) == 2:
        return [Gate("TOFFOLI", (c[0], c[1], target))]
    need = len(c) - 2
    if len(scratch) < need:
        raise ValueError(f"need {need} scratch wires, have {len(scratch)}")
    up = [Gate("TOFFOLI", (c[0], c[1], scratch[0]))]
    for j in range(2, len(c) - 1):
        up.append(Gate("TOFFOLI", (scratch[j - 2], c[j], scratch[j - 1])))
    last = Gate("TOFFOLI", (scratch[need - 1], c[-1], target))
    return up + [last] + up[::-1]


def _minterm(wires: Sequence[int], value: int, target: int, scratch: Sequence[int]) -> list[Gate]:
    flips = [Gate("X", (w,)) for k, w in enumerate(wires) if not (value >> (len(wires) - 1 - k)) & 1]
    return flips + _and_into(wires, target, scratch) + flips


def witness_set_circuit(ell: int, witnesses: Sequence[str | int], input_len: int = 0) -> Circuit:
    """Deterministic verifier accepting exactly the given ``ell``-bit witnesses.

    Wires: input (ignored), witness, scratch, output. Distinct minterms are
    disjoint, so XOR-ing them into the output computes their OR.
    """
    values = sorted({int(w, 2) if isinstance(w, str) else int(w) for w in witnesses})
    if any(not 0 <= v < 2**ell for v in values):
        raise ValueError("witness out of range")
    wit = list(range(input_len, input_len + ell))
    scratch = list(range(input_len + ell, input_len + ell + max(0, ell - 2)))
    out = input_len + ell + len(scratch)
    gates: list[Gate] = []
    for v in values:
        gates += _minterm(wit, v, out, scratch)
    proofs = ([list(range(input_len))] if input_len else []) + [wit]
    return Circuit(out + 1, tuple(gates), Layout(proofs, scratch + [out], out))


def relative_witness_circuit(ell: int, patterns: Sequence[str | int]) -> Circuit:
    """Registers ``[x (1 bit), y1 (ell), y2 (ell)]``; accepts iff ``x = 1`` and ``y1 xor y2`` is a pattern."""
    values = sorted({int(p, 2) if isinstance(p, str) else int(p) for p in patterns})
    x = 0
    y1 = list(range(1, 1 + ell))
    y2 = list(range(1 + ell, 1 + 2 * ell))
    scratch = list(range(1 + 2 * ell, 1 + 2 * ell + max(0, ell - 1)))
    out = 1 + 2 * ell + len(scratch)
    mix = [Gate("CNOT", (a, b)) for a, b in zip(y1, y2)]
    gates = list(mix)
    for v in values:
        gates += _minterm([x] + y2, (1 << ell) | v, out, scratch)
    gates += mix
    return Circuit(out + 1, tuple(gates), Layout([[x], y1, y2], scratch + [out], out))


# ---------------------------------------------------------------------------
# instances


@lru_cache(maxsize=256)
def _witness_table(circuit_json: str, x: str) -> np.ndarray:
    circuit = Circuit.from_json(circuit_json)
    ell = len(circuit.layout.proofs[-1])
    n = circuit.num_wires
    cols = _proof_column_indices(circuit)
    base = int(x, 2) << ell if x else 0
    idx = cols[base + np.arange(2**ell)]
    states = np.zeros((2**n, idx.size), dtype=complex)
    states[idx, np.arange(idx.size)] = 1.0
    out = apply_gates(states, circuit.gates, n)
    acc = np.sum(np.abs(out[_output_mask(circuit)]) ** 2, axis=0)
    acc = np.clip(acc, 0.0, 1.0)
    acc.flags.writeable = False
    return acc


@dataclass(frozen=True, eq=False)
class TqcmappInstance:
    """``(U, x, p1, p2, ell)``: does some ``ell``-bit witness reach ``p2``?

    ``x`` fills every proof register of ``U`` except the last, which holds
    the witness.
    """

    circuit: Circuit
    x: str
    p1: Fraction
    p2: Fraction
    ell: int

    def __post_init__(self):
        object.__setattr__(self, "p1", _as_fraction(self.p1))
        object.__setattr__(self, "p2", _as_fraction(self.p2))
        if not 0 <= self.p1 < self.p2 <= 1:
            raise ValueError(f"need 0 <= p1 < p2 <= 1, got {self.p1}, {self.p2}")
        for p in (self.p1, self.p2):
            if p.denominator > UNARY_LIMIT:
                raise ValueError(f"threshold {p} too long for a unary encoding")
        if not 1 <= self.ell <= MAX_ELL:
            raise ValueError(f"witness length must lie in 1..{MAX_ELL}")
        proofs = self.circuit.layout.proofs
        if len(proofs[-1]) != self.ell:
            raise ValueError(f"last proof register has {len(proofs[-1])} wires, expected {self.ell}")
        if sum(len(p) for p in proofs[:-1]) != len(self.x) or any(ch not in "01" for ch in self.x):
            raise ValueError("x must be a bit string filling the non-witness registers")

    @property
    def constraints(self) -> tuple[tuple[int, ...], ...]:
        return ()

    def base_table(self) -> np.ndarray:
        """Exact acceptance of every witness under ``U`` alone."""
        return _witness_table(self.circuit.to_json(), self.x)

    def acceptance_table(self) -> np.ndarray:
        return self.base_table()

    def witness_acceptance(self, d: str) -> float:
        if len(d) != self.ell:
            raise ValueError(f"witness must have {self.ell} bits")
        return float(self.acceptance_table()[int(d, 2)])

    def witnesses(self) -> list[str]:
        t = self.acceptance_table()
        return [bits_of(i, self.ell) for i in np.flatnonzero(t >= float(self.p2))]

    def classify(self) -> str:
        t = self.acceptance_table()
        if np.any(t >= float(self.p2)):
            return "yes"
        if np.all(t <= float(self.p1)):
            return "no"
        return "invalid"

    def to_dict(self) -> dict:
        return {
            "circuit": self.circuit.to_dict(),
            "x": self.x,
            "p1": [self.p1.numerator, self.p1.denominator],
            "p2": [self.p2.numerator, self.p2.denominator],
            "ell": self.ell,
            "constraints": [list(c) for c in self.constraints],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @staticmethod
    def from_dict(data: dict) -> "TqcmappInstance":
        circuit = Circuit.from_dict(data["circuit"])
        args = (circuit, data["x"], _as_fraction(data["p1"]), _as_fraction(data["p2"]), int(data["ell"]))
        cons = data.get("constraints") or []
        if cons:
            return UqcmappInstance(*args, constraints=tuple(tuple(int(b) for b in c) for c in cons))
        return TqcmappInstance(*args)

    @staticmethod
    def from_json(text: str) -> "TqcmappInstance":
        return TqcmappInstance.from_dict(json.loads(text))


def constraint_mask(constraints: Sequence[Sequence[int]], ell: int) -> np.ndarray:
    """Boolean mask over witnesses satisfying every ``<a, d> = b`` row."""
    mask = np.ones(2**ell, dtype=bool)
    if not len(constraints):
        return mask
    c = np.asarray(constraints, dtype=np.int64)
    d = _bit_matrix(ell)
    lhs = (d @ c[:, :ell].T) % 2
    return np.all(lhs == c[None, :, ell], axis=1)


@dataclass(frozen=True, eq=False)
class UqcmappInstance(TqcmappInstance):
    """An instance whose witnesses must also satisfy affine parity constraints.

    ``yes`` means exactly one witness reaches ``p2`` and every other is at
    most ``p1``.
    """

    constraints: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        super().__post_init__()
        cons = tuple(tuple(int(b) for b in c) for c in self.constraints)
        for c in cons:
            if len(c) != self.ell + 1 or any(b not in (0, 1) for b in c):
                raise ValueError(f"constraint {c} is not ell+1 bits")
        object.__setattr__(self, "constraints", cons)

    def acceptance_table(self) -> np.ndarray:
        return np.where(constraint_mask(self.constraints, self.ell), self.base_table(), 0.0)

    def classify(self) -> str:
        t = self.acceptance_table()
        hi = t >= float(self.p2)
        if hi.sum() == 1 and np.all(t[~hi] <= float(self.p1)):
            return "yes"
        if np.all(t <= float(self.p1)):
            return "no"
        return "invalid"


def realize_constraints(inst: UqcmappInstance) -> Circuit:
    """Circuit computing ``U(x, d) AND h(d) = 0`` with gates only.

    Each constraint's parity ``<a, d> + b + 1`` is computed into a fresh wire
    (1 when satisfied); the old output and all flags are ANDed into a new
    output wire. Used to cross-check the tabular constraint semantics.
    """
    base = inst.circuit
    ell = inst.ell
    wit = base.layout.proofs[-1]
    n0 = base.num_wires
    k = len(inst.constraints)
    flags = list(range(n0, n0 + k))
    controls = [base.layout.output] + flags
    scratch = list(range(n0 + k, n0 + k + max(0, len(controls) - 2)))
    out = n0 + k + len(scratch)
    gates = list(base.gates)
    for f, row in zip(flags, inst.constraints):
        for w, a in zip(wit, row[:ell]):
            if a:
                gates.append(Gate("CNOT", (w, f)))
        if not row[ell]:
            gates.append(Gate("X", (f,)))
    gates += _and_into(controls, out, scratch)
    anc = tuple(base.layout.ancilla) + tuple(flags) + tuple(scratch) + (out,)
    lay = Layout(base.layout.proofs, anc, out, base.layout.names)
    return Circuit(out + 1, tuple(gates), lay)


def restrict_parity(inst: TqcmappInstance, z: str) -> UqcmappInstance:
    """``phi_z``: additionally require ``<z, d> = 1 (mod 2)``."""
    if len(z) != inst.ell:
        raise ValueError(f"z must have {inst.ell} bits")
    row = tuple(int(b) for b in z) + (1,)
    return UqcmappInstance(inst.circuit, inst.x, inst.p1, inst.p2, inst.ell, inst.constraints + (row,))


# ---------------------------------------------------------------------------
# isolation


def draw_hash(ell: int, rng: np.random.Generator) -> tuple[tuple[int, ...], ...]:
    k = int(rng.integers(1, ell + 2))
    a = rng.integers(0, 2, size=(k, ell))
    b = rng.integers(0, 2, size=k)
    return tuple(tuple(int(v) for v in row) + (int(r),) for row, r in zip(a, b))


def vv_isolate(inst: TqcmappInstance, rng: np.random.Generator | int) -> UqcmappInstance:
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    cons = draw_hash(inst.ell, rng)
    return UqcmappInstance(inst.circuit, inst.x, inst.p1, inst.p2, inst.ell, inst.constraints + cons)


def all_hash_draws(ell: int) -> Iterator[tuple[float, tuple[tuple[int, ...], ...]]]:
    """Every ``(probability, constraints)`` pair the isolation step can draw."""
    for k in range(1, ell + 2):
        weight = 1.0 / (ell + 1) / 2 ** (k * (ell + 1))
        for flat in product((0, 1), repeat=k * (ell + 1)):
            yield weight, tuple(tuple(flat[r * (ell + 1) : (r + 1) * (ell + 1)]) for r in range(k))


def exact_isolation_probability(inst: TqcmappInstance) -> float:
    """Probability over all hash draws that isolation yields a ``yes`` instance."""
    table = inst.acceptance_table()
    total = 0.0
    for w, cons in all_hash_draws(inst.ell):
        t = np.where(constraint_mask(cons, inst.ell), table, 0.0)
        hi = t >= float(inst.p2)
        if hi.sum() == 1 and np.all(t[~hi] <= float(inst.p1)):
            total += w
    return total


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(block),)))


def _run_blocks(fn: Callable[[np.random.Generator, int], np.ndarray], trials: int, seed: int, workers: int) -> np.ndarray:
    """Run ``fn(rng, size)`` over fixed-size blocks; output is independent of ``workers``."""
    sizes = [min(TRIAL_BLOCK, trials - s) for s in range(0, trials, TRIAL_BLOCK)]
    jobs = [(b, size) for b, size in enumerate(sizes)]

    def run(job):
        b, size = job
        return fn(_block_rng(seed, b), size)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.concatenate(parts) if parts else np.zeros(0)


def _hash_survivors(ell: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Boolean ``(size, 2^ell)`` masks of witnesses with ``h(d) = 0``."""
    k = rng.integers(1, ell + 2, size=size)
    a = rng.integers(0, 2, size=(size, ell + 1, ell))
    b = rng.integers(0, 2, size=(size, ell + 1))
    d = _bit_matrix(ell)
    h = (np.einsum("dl,srl->sdr", d, a) + b[:, None, :]) % 2
    active = np.arange(ell + 1)[None, :] < k[:, None]
    return ~np.any((h == 1) & active[:, None, :], axis=2)


def _isolated(table: np.ndarray, survive: np.ndarray, p1: float, p2: float) -> np.ndarray:
    t = np.where(survive, table[None, :], 0.0)
    hi = t >= p2
    return (hi.sum(axis=1) == 1) & np.all(hi | (t <= p1), axis=1)


def isolation_trials(inst: TqcmappInstance, trials: int, seed: int, workers: int = 1) -> np.ndarray:
    """Per-trial success flags (isolation produced a ``yes`` instance)."""
    table = inst.acceptance_table()
    p1, p2 = float(inst.p1), float(inst.p2)

    def block(rng, size):
        return _isolated(table, _hash_survivors(inst.ell, rng, size), p1, p2)

    return _run_blocks(block, trials, seed, workers).astype(bool)


@dataclass(frozen=True)
class FrequencyEstimate:
    successes: int
    trials: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    @property
    def stderr(self) -> float:
        p = self.rate
        return math.sqrt(p * (1 - p) / self.trials)

    def lower(self, confidence: float = 0.99) -> float:
        return clopper_pearson_lower(self.successes, self.trials, confidence)

    def upper(self, confidence: float = 0.99) -> float:
        return clopper_pearson_upper(self.successes, self.trials, confidence)


def isolation_frequency(inst: TqcmappInstance, trials: int, seed: int, workers: int = 1) -> FrequencyEstimate:
    flags = isolation_trials(inst, trials, seed, workers)
    return FrequencyEstimate(int(flags.sum()), trials)


def isolation_floor(ell: int) -> float:
    return 1.0 / (32 * ell**2)


# ---------------------------------------------------------------------------
# Bernstein-Vazirani


def walsh_hadamard(vec: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform along the last axis."""
    out = np.array(vec, dtype=float, copy=True)
    n = out.shape[-1]
    h = 1
    while h < n:
        shape = out.shape[:-1] + (n // (2 * h), 2, h)
        v = out.reshape(shape)
        a, b = v[..., 0, :].copy(), v[..., 1, :].copy()
        v[..., 0, :] = a + b
        v[..., 1, :] = a - b
        out = v.reshape(out.shape)
        h *= 2
    return out


def bv_distribution_abstract(table: np.ndarray, eta: float | np.ndarray) -> np.ndarray:
    """Outcome distribution of one-query BV against a noisy compute-uncompute oracle.

    For each ``z`` the decision circuit answers ``f(z)`` with amplitude
    ``sqrt(1 - eta_z)``. After compute, phase kickback and uncompute the
    query register holds ``(-1)^f(z) (1 - 2 eta_z)`` on the clean branch and
    weight ``4 eta_z (1 - eta_z)`` on garbage orthogonal to it. Garbage of
    different ``z`` is taken as mutually orthogonal, so it spreads uniformly
    over outcomes.
    """
    table = np.asarray(table, dtype=int)
    size = table.shape[-1]
    eta = np.broadcast_to(np.asarray(eta, dtype=float), table.shape)
    if np.any(eta < 0) or np.any(eta >= 0.5):
        raise ValueError("oracle error rate must lie in [0, 1/2)")
    amp = np.where(table == 1, -1.0, 1.0) * (1 - 2 * eta)
    coherent = (walsh_hadamard(amp) / size) ** 2
    garbage = np.sum(4 * eta * (1 - eta), axis=-1, keepdims=True) / size**2
    p = coherent + garbage
    return p / p.sum(axis=-1, keepdims=True)


def decider_circuit(table: Sequence[int], coins: int = 0) -> Circuit:
    """Decision circuit for ``z -> table[z]`` whose answer flips with probability ``2^-coins``.

    Wires: query ``z`` (proof), answer (output), coins, scratch. The coins
    are put in uniform superposition and the answer flips when coin ``i``
    equals query bit ``i mod n`` for every ``i``. Tying the flip to ``z``
    makes the leftover coin state depend on the query, so errors do not
    cancel coherently across queries.
    """
    table = [int(t) for t in table]
    n = int(round(math.log2(len(table))))
    if 2**n != len(table) or n < 1:
        raise ValueError("table length must be a power of two >= 2")
    z = list(range(n))
    ans = n
    coin = list(range(n + 1, n + 1 + coins))
    scratch_n = max(0, n - 2, coins - 2)
    scratch = list(range(n + 1 + coins, n + 1 + coins + scratch_n))
    gates: list[Gate] = []
    for v, bit in enumerate(table):
        if bit:
            gates += _minterm(z, v, ans, scratch)
    if coins:
        gates += [Gate("H", (c,)) for c in coin]
        match = [g for i, c in enumerate(coin) for g in (Gate("CNOT", (z[i % n], c)), Gate("X", (c,)))]
        gates += match + _and_into(coin, ans, scratch) + match[::-1]
    return Circuit(n + 1 + coins + scratch_n, tuple(gates), Layout([z], [ans] + coin + scratch, ans))


def bv_distribution_circuit(decider: Circuit) -> np.ndarray:
    """Simulate BV end to end: ``H^n``, compute, CNOT into ``|->``, uncompute, ``H^n``."""
    z = list(decider.layout.proofs[0])
    n = len(z)
    w = decider.num_wires
    kick = w
    total = w + 1
    pre = [Gate("H", (q,)) for q in z] + [Gate("X", (kick,)), Gate("H", (kick,))]
    body = list(decider.gates) + [Gate("CNOT", (decider.layout.output, kick))] + list(decider.inverse().gates)
    post = [Gate("H", (q,)) for q in z]
    state = np.zeros((2**total, 1), dtype=complex)
    state[0, 0] = 1.0
    state = apply_gates(state, pre + body + post, total)
    # query wires are the leading (most significant) wires
    probs = np.sum(np.abs(state[:, 0].reshape(2**n, -1)) ** 2, axis=1)
    return probs / probs.sum()


def has_witness(inst: TqcmappInstance) -> bool:
    return bool(np.any(inst.acceptance_table() >= float(inst.p2)))


@dataclass(frozen=True)
class NoisyDecisionOracle:
    """Exact predicate whose answer is flipped with probability ``eta``.

    ``reduction`` maps a query string to the object the predicate judges; by
    default the predicate sees the query string itself.
    """

    predicate: Callable = has_witness
    eta: float = 0.0
    reduction: Callable | None = None

    def __post_init__(self):
        if not 0.0 <= self.eta < 0.5:
            raise ValueError("flip probability must lie in [0, 1/2)")

    def exact(self, query) -> bool:
        obj = self.reduction(query) if self.reduction is not None else query
        return bool(self.predicate(obj))

    def __call__(self, query, rng: np.random.Generator) -> bool:
        ans = self.exact(query)
        return (not ans) if rng.random() < self.eta else ans

    def truth_table(self, n: int) -> np.ndarray:
        return np.array([self.exact(bits_of(z, n)) for z in range(2**n)], dtype=int)

    def bv_distribution(self, table: np.ndarray) -> np.ndarray:
        return bv_distribution_abstract(table, self.eta)


@dataclass
class CircuitDecider:
    """A supplied decision circuit family: exact predicate plus ``coins`` flip qubits.

    Its BV outcome distributions come from full circuit simulation and are
    cached per truth table.
    """

    coins: int = 0
    predicate: Callable = has_witness
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def eta(self) -> float:
        return 2.0**-self.coins if self.coins else 0.0

    def exact(self, query) -> bool:
        return bool(self.predicate(query))

    def circuit(self, table: Sequence[int]) -> Circuit:
        return decider_circuit(table, self.coins)

    def bv_distribution(self, table: np.ndarray) -> np.ndarray:
        key = np.asarray(table, dtype=np.uint8).tobytes()
        hit = self._cache.get(key)
        if hit is None:
            hit = bv_distribution_circuit(self.circuit(table))
            self._cache[key] = hit
        return hit


def parity_table(s: str) -> np.ndarray:
    n = len(s)
    return parity_matrix(n)[:, int(s, 2)].copy()


def bernstein_vazirani(oracle, n: int, rng: np.random.Generator, hidden: str | None = None) -> str:
    """One BV run. ``hidden`` builds the parity table ``<z, hidden>``; otherwise the oracle's own table."""
    if n < 1:
        raise ValueError("n must be >= 1")
    table = parity_table(hidden) if hidden is not None else oracle.truth_table(n)
    p = oracle.bv_distribution(table)
    return bits_of(int(rng.choice(2**n, p=p)), n)


def bv_success_probability(oracle, s: str) -> float:
    return float(oracle.bv_distribution(parity_table(s))[int(s, 2)])


def approx_bv_bound(n: int) -> float:
    return 1.0 - math.sqrt(2.0 ** -(n - 4))


# ---------------------------------------------------------------------------
# search to decision and the composed verifier


def parity_restricted_table(inst: TqcmappInstance, predicate: Callable = has_witness) -> np.ndarray:
    """``table[z] = predicate(phi_z)`` built from the restricted instances themselves."""
    return np.array([predicate(restrict_parity(inst, bits_of(z, inst.ell))) for z in range(2**inst.ell)], dtype=int)


def search_to_decision(inst: TqcmappInstance, decider, rng: np.random.Generator) -> str | None:
    """Find the unique witness, or ``None`` when the candidate fails the post-check."""
    table = parity_restricted_table(inst, decider.predicate)
    p = decider.bv_distribution(table)
    cand = bits_of(int(rng.choice(2**inst.ell, p=p)), inst.ell)
    return cand if inst.witness_acceptance(cand) >= float(inst.p2) else None


def qckl_thresholds(ell: int) -> tuple[Fraction, Fraction]:
    """``(1/ell^4, 1 - 1/ell^4)``; at ``ell = 1`` these cross, so ``(1/3, 2/3)`` is used."""
    if ell == 1:
        return Fraction(1, 3), Fraction(2, 3)
    return Fraction(1, ell**4), 1 - Fraction(1, ell**4)


def qckl_verifier(x: str, y1: str, verifier: Circuit, decider, rng: np.random.Generator) -> float:
    """Acceptance probability of one run of the three-step verifier.

    Isolate on the instance ``(V, x y1, 1/ell^4, 1 - 1/ell^4, ell)``, search
    for ``y2``, then return the exact acceptance of ``V(x, y1, y2)`` (0 when
    the search reports no witness).
    """
    ell = len(verifier.layout.proofs[-1])
    p1, p2 = qckl_thresholds(ell)
    base = TqcmappInstance(verifier, x + y1, p1, p2, ell)
    phi = vv_isolate(base, rng)
    y2 = search_to_decision(phi, decider, rng)
    if y2 is None:
        return 0.0
    return base.witness_acceptance(y2)


def qckl_bound(ell: int) -> float:
    return (1.0 / (32 * ell**2)) * (1 - 4 / 2 ** (ell / 2)) * (1 - 1 / ell**4)


def qckl_trials(
    x: str, y1: str, verifier: Circuit, decider, trials: int, seed: int, workers: int = 1
) -> np.ndarray:
    """Accept/reject outcome of many independent runs of :func:`qckl_verifier`.

    Vectorized over a block of trials: hashes, BV samples and the final
    verifier coin are all drawn per trial.
    """
    ell = len(verifier.layout.proofs[-1])
    base = TqcmappInstance(verifier, x + y1, *qckl_thresholds(ell), ell)
    p2 = float(base.p2)
    table = base.acceptance_table()
    parity = parity_matrix(ell)

    def block(rng, size):
        survive = _hash_survivors(ell, rng, size)
        acc = np.where(survive, table[None, :], 0.0)
        wit = acc >= p2
        # decider predicate on phi_z: some witness with <z, d> = 1
        f = (wit.astype(np.int64) @ parity.T > 0).astype(np.int64)
        tables, which = np.unique(f, axis=0, return_inverse=True)
        which = which.reshape(-1)
        u_bv = rng.random(size)
        u_acc = rng.random(size)
        out = np.zeros(size, dtype=bool)
        for g, tab in enumerate(tables):
            rows = np.flatnonzero(which == g)
            dist = decider.bv_distribution(tab)
            cdf = np.cumsum(dist)
            cdf[-1] = 1.0
            y = np.searchsorted(cdf, u_bv[rows], side="right")
            found = wit[rows, y]
            out[rows] = found & (u_acc[rows] < table[y])
        return out

    return _run_blocks(block, trials, seed, workers).astype(bool)


def exact_qckl_acceptance(x: str, y1: str, verifier: Circuit, decider) -> float:
    """Expected acceptance of :func:`qckl_verifier` by enumerating every hash draw."""
    ell = len(verifier.layout.proofs[-1])
    p1, p2 = qckl_thresholds(ell)
    base = TqcmappInstance(verifier, x + y1, p1, p2, ell)
    table = base.acceptance_table()
    parity = parity_matrix(ell)
    total = 0.0
    for w, cons in all_hash_draws(ell):
        acc = np.where(constraint_mask(cons, ell), table, 0.0)
        wit = acc >= float(p2)
        f = (parity @ wit.astype(np.int64) > 0).astype(int)
        dist = decider.bv_distribution(f)
        total += w * float(np.sum(dist[wit] * table[wit]))
    return total
