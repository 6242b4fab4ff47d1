"""Verifier transformations built as explicit acceptance operators.

Two constructions are provided, each as a :class:`QuantifiedGame` whose value
can be measured with :mod:`qphlab.games`:

* one-sided amplification of a pure-proof game with an even number of
  registers, mixing a product test with thresholded parallel repetition;
* simulation of a classical-proof game by a pure-proof game, mixing a
  product test with a standard-basis measurement branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .games import solve_classical_game
from .linalg import QState, permute_subsystems
from .product_tests import AptLayout, apt_operator
from .verifier import (
    DEFAULT_MAX_DIM,
    AcceptOperator,
    DimensionCapError,
    QuantifiedGame,
    alternating_prefix,
    parallel_repetition,
)


def _unit(v) -> np.ndarray:
    arr = np.asarray(v.amplitudes if isinstance(v, QState) else v, dtype=complex)
    return arr / np.linalg.norm(arr)


def _kron_all(vecs: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vecs:
        out = np.kron(out, v)
    return out


# ---------------------------------------------------------------------------
# one-sided amplification


@dataclass(frozen=True)
class AmplifiedGameSpec:
    """A pure-proof game with ``i`` (even) registers, ending in ``E``, plus (c, s, m)."""

    base: QuantifiedGame
    c: float
    s: float
    m: int

    def __post_init__(self):
        i = len(self.base.dims)
        if i % 2:
            raise ValueError(f"amplification needs an even number of proofs, got {i}")
        if self.base.prefix[-1] != "E":
            raise ValueError("the last quantifier must be E in the YES orientation")
        if not 0.0 <= self.s < self.c <= 1.0:
            raise ValueError(f"need 0 <= s < c <= 1, got c={self.c}, s={self.s}")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def threshold(self) -> float:
        return (self.c + self.s) / 2

    @property
    def layout(self) -> AptLayout:
        dims = self.base.dims
        return AptLayout(dims[:-1], self.m, dims[-1] ** self.m)


def default_copies(n: int, c: float, s: float, dims: Sequence[int], max_dim: int = DEFAULT_MAX_DIM) -> int:
    """``ceil(n / (c - s)^2)`` copies, reduced until the joint space fits ``max_dim``."""
    m = max(1, math.ceil(n / (c - s) ** 2))
    total = int(np.prod(dims))
    rest = int(np.prod(dims[:-1]))
    while m > 1 and rest * total**m > max_dim:
        m -= 1
    return m


def one_sided_amplify(spec: AmplifiedGameSpec, max_dim: int = DEFAULT_MAX_DIM) -> QuantifiedGame:
    """``V' = 1/2 M_APT + 1/2 (I_A (x) M_par)`` on registers ``[proofs 1..i-1, BC]``.

    ``B`` holds ``m`` copy-bundles of proofs ``1..i-1`` and ``C`` holds ``m``
    copies of proof ``i``; repetition ``j`` reads bundle ``j`` of ``B`` and
    copy ``j`` of ``C``.
    """
    base = spec.base
    dims = base.dims
    i, m = len(dims), spec.m
    layout = spec.layout
    total = layout.d * layout.bc_dim
    if total > max_dim:
        raise DimensionCapError(f"amplified verifier of dim {total} exceeds cap {max_dim}")
    apt = apt_operator(layout, max_dim)
    par = parallel_repetition(base.accept, m, spec.threshold, max_dim)
    # par is copy-major over (p_1..p_i); regroup into B (copy-major over p_1..p_{i-1}) then C
    par_dims = list(dims) * m
    perm = [j * i + r for j in range(m) for r in range(i - 1)] + [j * i + (i - 1) for j in range(m)]
    par_mat = permute_subsystems(par.matrix, par_dims, perm)
    rep = np.kron(np.eye(layout.d), par_mat)
    mat = 0.5 * apt.matrix + 0.5 * rep
    names = tuple(base.accept.names[:-1]) + ("BC",)
    acc = AcceptOperator(mat, apt.dims, names)
    return QuantifiedGame(acc, base.prefix, ("pure",) * i)


def amplified_honest_proof(spec: AmplifiedGameSpec, states: Sequence[QState | np.ndarray]) -> list[np.ndarray]:
    """Honest proofs ``[psi_1, ..., psi_{i-1}, (psi_1..psi_{i-1})^m (x) psi_i^m]``."""
    if len(states) != len(spec.base.dims):
        raise ValueError("need one state per base register")
    vecs = [_unit(v) for v in states]
    bundle = _kron_all(vecs[:-1])
    bc = np.kron(_kron_all([bundle] * spec.m), _kron_all([vecs[-1]] * spec.m))
    return vecs[:-1] + [bc]


def amplified_completeness_bound(c: float, s: float, m: int) -> float:
    return 0.5 + 0.5 * (1.0 - math.exp(-((c - s) ** 2) * m / 2))


def amplified_soundness_bound(s: float, m: int, n: int = 1) -> float:
    return 1.0 - 1.0 / (4 * m * n) + s


# ---------------------------------------------------------------------------
# classical-to-pure simulation


@dataclass(frozen=True)
class SimulationGameSpec:
    """Classical verifier over ``k`` (even) bit-string proofs plus a copy count.

    ``verifier`` is read through its diagonal: entry ``(x_1..x_k)`` is the
    acceptance probability on those strings.
    """

    verifier: AcceptOperator
    proof_bits: tuple[int, ...]
    m: int

    def __post_init__(self):
        bits = tuple(int(b) for b in self.proof_bits)
        object.__setattr__(self, "proof_bits", bits)
        if len(bits) % 2 or not bits:
            raise ValueError(f"need an even number k >= 2 of proofs, got {len(bits)}")
        if any(b < 1 for b in bits):
            raise ValueError("every proof needs at least one bit")
        if tuple(2**b for b in bits) != tuple(self.verifier.dims):
            raise ValueError(f"proof bits {bits} do not match verifier dims {self.verifier.dims}")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def k(self) -> int:
        return len(self.proof_bits)

    @property
    def universal(self) -> tuple[int, ...]:
        """0-based indices of the proofs universally quantified in the YES case."""
        return tuple(range(0, self.k - 1, 2))

    @property
    def layout(self) -> AptLayout:
        dims = self.verifier.dims
        return AptLayout(dims[:-1], self.m, dims[-1])

    @property
    def classical_game(self) -> QuantifiedGame:
        return QuantifiedGame(self.verifier, alternating_prefix(self.k, "A"), ("classical",))

    @property
    def table(self) -> np.ndarray:
        return np.clip(np.real(np.diag(self.verifier.matrix)), 0.0, 1.0).reshape(self.verifier.dims)


def measurement_branch_diagonal(spec: SimulationGameSpec) -> np.ndarray:
    """Diagonal of the standard-basis branch over ``[x_1..x_{k-1}, copies, x_k]``.

    At the first proof index whose copies disagree with it, the value is 1
    for universal indices and 0 otherwise; with no disagreement it is the
    verifier's acceptance on ``(x_1..x_{k-1}, x_k)``.
    """
    dims = spec.verifier.dims
    k, m = spec.k, spec.m
    head = list(dims[:-1])
    reg_dims = head + head * m + [dims[-1]]
    idx = np.indices(reg_dims).reshape(len(reg_dims), -1)
    xs = idx[: k - 1]
    copies = idx[k - 1 : k - 1 + (k - 1) * m].reshape(m, k - 1, -1)
    xk = idx[-1]
    mismatch = np.any(copies != xs[None], axis=0)  # (k-1, N)
    values = spec.table[tuple(xs) + (xk,)]
    universal = np.zeros(k - 1, dtype=bool)
    universal[list(spec.universal)] = True
    decided = np.zeros(values.shape, dtype=bool)
    out = values.astype(float).copy()
    for i in range(k - 1):
        hit = mismatch[i] & ~decided
        out[hit] = 1.0 if universal[i] else 0.0
        decided |= hit
    return out


def measurement_branch_operator(spec: SimulationGameSpec, max_dim: int = DEFAULT_MAX_DIM) -> AcceptOperator:
    layout = spec.layout
    total = layout.d * layout.bc_dim
    if total > max_dim:
        raise DimensionCapError(f"simulation verifier of dim {total} exceeds cap {max_dim}")
    diag = measurement_branch_diagonal(spec)
    return AcceptOperator(np.diag(diag).astype(complex), tuple(spec.verifier.dims[:-1]) + (layout.bc_dim,))


def qcph_to_qphpure_transform(spec: SimulationGameSpec, max_dim: int = DEFAULT_MAX_DIM) -> QuantifiedGame:
    """``V' = 1/2 M_APT + 1/2 M_meas`` as a pure-proof game with prefix ``A E ... E``."""
    meas = measurement_branch_operator(spec, max_dim)
    apt = apt_operator(spec.layout, max_dim)
    mat = 0.5 * apt.matrix + 0.5 * meas.matrix
    names = tuple(spec.verifier.names[:-1]) + ("AB",)
    acc = AcceptOperator(mat, apt.dims, names)
    return QuantifiedGame(acc, alternating_prefix(spec.k, "A"), ("pure",) * spec.k)


def _best_response(table: np.ndarray, fixed: Sequence[int], prefix: Sequence[str]) -> int:
    sub = table[tuple(fixed)]
    dims = sub.shape
    acc = AcceptOperator(np.diag(sub.reshape(-1)).astype(complex), dims, check=False)
    bits = [int(round(math.log2(d))) for d in dims]
    _, line = solve_classical_game(QuantifiedGame(acc, tuple(prefix), ("classical",)), bits)
    return int(line[0], 2)


def qcph_honest_proof(
    spec: SimulationGameSpec, universal_states: Sequence[QState | np.ndarray | str]
) -> list[np.ndarray]:
    """Honest pure proofs for the simulation game.

    Universal proofs are given; each existential proof answers the most
    likely outcome of the universal proofs before it with the optimal string
    of the classical game. The last register carries ``m`` exact copies of
    proofs ``1..k-1`` followed by the optimal last string.
    """
    dims = spec.verifier.dims
    k = spec.k
    if len(universal_states) != len(spec.universal):
        raise ValueError(f"expected {len(spec.universal)} universal proofs")
    prefix = alternating_prefix(k, "A")
    table = spec.table
    proofs: list[np.ndarray] = []
    choices: list[int] = []
    u_iter = iter(universal_states)
    for level in range(k):
        if level in spec.universal:
            st = next(u_iter)
            vec = QState.from_bits(st).amplitudes if isinstance(st, str) else _unit(st)
            vec = np.asarray(vec, dtype=complex)
            if vec.size != dims[level]:
                raise ValueError(f"universal proof {level} has dim {vec.size}, expected {dims[level]}")
            # most likely outcome; argmax keeps the smallest index on ties
            choices.append(int(np.argmax(np.abs(vec) ** 2)))
            proofs.append(vec)
        else:
            y = _best_response(table, choices, prefix[level:])
            choices.append(y)
            proofs.append(np.eye(dims[level], dtype=complex)[y])
    copies = _kron_all([_kron_all(proofs[:-1])] * spec.m)
    last = np.kron(copies, proofs[-1])
    return proofs[:-1] + [last]


def simulation_completeness_bound(c: float, m: int) -> float:
    return 0.5 + 0.5 * (c - 2.0**-m)


def simulation_soundness_bound(s: float, m: int, n: int = 1) -> float:
    return 1.0 - 1.0 / (4 * m * n) + s


def measurement_reject_bound(p: float, c: float, m: int) -> float:
    """``min(p, 1-p)^m + (1 - c)`` for top outcome weight ``p``."""
    return min(p, 1.0 - p) ** m + (1.0 - c)
