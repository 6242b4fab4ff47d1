"""Dense complex linear algebra over small tensor-factored Hilbert spaces.

Subsystems are ordered big-endian: the first entry of ``dims`` is the most
significant factor of the Kronecker product, matching ``np.kron(a, b)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence, Union

import numpy as np

NORM_TOL = 1e-10
HERM_TOL = 1e-10


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.flags.writeable = False
    return arr


def _check_dims(dims: Sequence[int], size: int) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise ValueError(f"dims must be positive integers, got {dims}")
    if int(np.prod(dims)) != size:
        raise ValueError(f"product of dims {dims} != {size}")
    return dims


@dataclass(frozen=True, eq=False)
class QState:
    """Unit-norm pure state over a declared factorization."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, amplitudes, dims: Sequence[int] | None = None):
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if dims is None:
            dims = (amps.size,)
        object.__setattr__(self, "dims", _check_dims(dims, amps.size))
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", _freeze(amps))

    @classmethod
    def normalized(cls, amplitudes, dims=None) -> "QState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(amps / np.linalg.norm(amps), dims)

    @classmethod
    def basis(cls, index: int, dims: Sequence[int] | int) -> "QState":
        dims = (dims,) if isinstance(dims, (int, np.integer)) else tuple(dims)
        vec = np.zeros(int(np.prod(dims)), dtype=complex)
        vec[index] = 1.0
        return cls(vec, dims)

    @classmethod
    def from_bits(cls, bits: str) -> "QState":
        """Computational-basis state of ``len(bits)`` qubits."""
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"not a bit string: {bits!r}")
        return cls.basis(int(bits, 2), (2,) * len(bits))

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityOp":
        v = self.amplitudes
        return DensityOp(np.outer(v, v.conj()), self.dims)

    def __repr__(self) -> str:
        return f"QState(dims={self.dims}, amplitudes={np.round(self.amplitudes, 6)})"


@dataclass(frozen=True, eq=False)
class HermitianOp:
    matrix: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, matrix, dims: Sequence[int] | None = None):
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {mat.shape}")
        if dims is None:
            dims = (mat.shape[0],)
        object.__setattr__(self, "dims", _check_dims(dims, mat.shape[0]))
        if not is_hermitian(mat):
            raise ValueError("matrix is not Hermitian")
        object.__setattr__(self, "matrix", _freeze(mat))
        self._validate()

    def _validate(self) -> None:
        pass

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dims={self.dims})"


class DensityOp(HermitianOp):
    """Positive semidefinite, unit-trace operator."""

    def _validate(self) -> None:
        tr = np.trace(self.matrix).real
        if abs(tr - 1.0) > NORM_TOL:
            raise ValueError(f"trace {tr!r} != 1")
        if self.eigvalsh()[0] < -NORM_TOL:
            raise ValueError("density operator has a negative eigenvalue")


Operator = Union[HermitianOp, DensityOp]


def is_hermitian(mat: np.ndarray, tol: float = HERM_TOL) -> bool:
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) <= tol)


def _same_kind(a, b) -> type:
    if isinstance(a, QState) and isinstance(b, QState):
        return QState
    if isinstance(a, DensityOp) and isinstance(b, DensityOp):
        return DensityOp
    if isinstance(a, HermitianOp) and isinstance(b, HermitianOp):
        return HermitianOp
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def tensor(*ops):
    """Kronecker product of states or operators, concatenating their dims."""
    if len(ops) == 1 and isinstance(ops[0], (list, tuple)):
        ops = tuple(ops[0])
    if not ops:
        raise ValueError("tensor() needs at least one operand")

    def pair(a, b):
        kind = _same_kind(a, b)
        dims = a.dims + b.dims
        if kind is QState:
            return QState(np.kron(a.amplitudes, b.amplitudes), dims)
        return kind(np.kron(a.matrix, b.matrix), dims)

    return reduce(pair, ops)


def permute_subsystems(mat: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a vector or square matrix.

    Subsystem ``perm[k]`` of the input becomes subsystem ``k`` of the output.
    """
    dims = tuple(dims)
    perm = tuple(perm)
    if sorted(perm) != list(range(len(dims))):
        raise ValueError(f"{perm} is not a permutation of {len(dims)} subsystems")
    n = len(dims)
    mat = np.asarray(mat)
    if mat.ndim == 1:
        return mat.reshape(dims).transpose(perm).reshape(-1)
    t = mat.reshape(dims + dims)
    t = t.transpose(perm + tuple(p + n for p in perm))
    size = mat.shape[0]
    return t.reshape(size, size)


def partial_trace_matrix(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    dims = tuple(dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    for k in keep:
        if not 0 <= k < n:
            raise IndexError(f"subsystem {k} out of range for {n} subsystems")
    if len(keep) == n:
        return np.array(mat, dtype=complex)
    drop = [i for i in range(n) if i not in keep]
    t = np.asarray(mat).reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise ValueError("too many subsystems")
    row = list(letters[:n])
    col = list(letters[n : 2 * n])
    for i in drop:
        col[i] = row[i]
    out = "".join(row[i] for i in keep) + "".join(col[i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, t)
    dk = int(np.prod([dims[i] for i in keep]))
    return reduced.reshape(dk, dk)


def partial_trace(op: Operator, keep: Sequence[int]) -> Operator:
    """Trace out every subsystem not listed in ``keep`` (0-based indices)."""
    keep = sorted(set(int(k) for k in keep))
    reduced = partial_trace_matrix(op.matrix, op.dims, keep)
    dims = tuple(op.dims[i] for i in keep)
    reduced = 0.5 * (reduced + reduced.conj().T)
    return type(op)(reduced, dims)


def extreme_eigenpair(op: Operator | np.ndarray, which: str = "max") -> tuple[float, QState]:
    """Largest (``which="max"``) or smallest eigenvalue with a unit eigenvector."""
    if isinstance(op, HermitianOp):
        mat, dims = op.matrix, op.dims
    else:
        mat = np.asarray(op, dtype=complex)
        dims = (mat.shape[0],)
        if not is_hermitian(mat):
            raise ValueError("matrix is not Hermitian")
    if which not in ("max", "min"):
        raise ValueError(f"which must be 'max' or 'min', got {which!r}")
    vals, vecs = np.linalg.eigh(mat)
    k = -1 if which == "max" else 0
    vec = vecs[:, k]
    return float(vals[k]), QState.normalized(vec, dims)


def trace_norm(mat: np.ndarray) -> float:
    mat = np.asarray(mat, dtype=complex)
    if is_hermitian(mat, 1e-12):
        return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T)))))
    return float(np.sum(np.linalg.svd(mat, compute_uv=False)))


def trace_distance(a: Operator | np.ndarray, b: Operator | np.ndarray) -> float:
    """Half the trace norm of ``a - b``."""
    ma = a.matrix if isinstance(a, HermitianOp) else np.asarray(a, dtype=complex)
    mb = b.matrix if isinstance(b, HermitianOp) else np.asarray(b, dtype=complex)
    if ma.shape != mb.shape:
        raise ValueError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    if isinstance(a, HermitianOp) and isinstance(b, HermitianOp) and a.dims != b.dims:
        raise ValueError(f"dims mismatch: {a.dims} vs {b.dims}")
    return 0.5 * trace_norm(ma - mb)


def pure_trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance between the pure states with amplitude vectors ``a``, ``b``."""
    ov = abs(np.vdot(a, b)) ** 2
    return float(np.sqrt(max(0.0, 1.0 - ov)))


def random_state(dims: Sequence[int] | int, rng: np.random.Generator) -> QState:
    """Haar-random pure state."""
    dims = (dims,) if isinstance(dims, (int, np.integer)) else tuple(dims)
    n = int(np.prod(dims))
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return QState.normalized(v, dims)


def random_density(dims: Sequence[int] | int, rng: np.random.Generator, rank: int | None = None) -> DensityOp:
    """Random density operator from the induced (Ginibre) measure."""
    dims = (dims,) if isinstance(dims, (int, np.integer)) else tuple(dims)
    n = int(np.prod(dims))
    rank = n if rank is None else rank
    g = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return DensityOp(0.5 * (rho + rho.conj().T), dims)


def random_projector(dim: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    q, _ = np.linalg.qr(g)
    return q @ q.conj().T


def complete_basis(v: np.ndarray) -> np.ndarray:
    """Unitary whose first column is the unit vector ``v``."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = v.size
    m = np.eye(d, dtype=complex)
    m[:, 0] = v
    # pick the pivot column to drop so the remaining columns stay independent
    k = int(np.argmax(np.abs(v)))
    cols = [v] + [m[:, j] for j in range(d) if j != k]
    q, r = np.linalg.qr(np.stack(cols, axis=1))
    q[:, 0] *= r[0, 0] / abs(r[0, 0])
    return q


def swap_permutation(dims: Sequence[int], a: int, b: int) -> np.ndarray:
    """Index map of the operator exchanging subsystems ``a`` and ``b`` (equal dims)."""
    dims = tuple(dims)
    if dims[a] != dims[b]:
        raise ValueError("can only swap subsystems of equal dimension")
    idx = np.arange(int(np.prod(dims))).reshape(dims)
    perm = list(range(len(dims)))
    perm[a], perm[b] = perm[b], perm[a]
    return idx.transpose(perm).reshape(-1)


def swap_operator(dims: Sequence[int], a: int, b: int) -> np.ndarray:
    """Dense permutation matrix exchanging subsystems ``a`` and ``b``."""
    perm = swap_permutation(dims, a, b)
    n = perm.size
    out = np.zeros((n, n), dtype=complex)
    out[perm, np.arange(n)] = 1.0
    return out


def projected_trace_gap(proj: np.ndarray, psi: np.ndarray, phi: np.ndarray) -> tuple[float, float]:
    """``(||P|psi><psi|P - P|phi><phi|P||_1, || |psi> - |phi> ||)`` for a projector ``P``."""
    a = proj @ np.asarray(psi, dtype=complex)
    b = proj @ np.asarray(phi, dtype=complex)
    lhs = trace_norm(np.outer(a, a.conj()) - np.outer(b, b.conj()))
    return lhs, float(np.linalg.norm(np.asarray(psi) - np.asarray(phi)))


def nearby_state(psi: np.ndarray, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Unit vector obtained by a random perturbation of ``psi`` of relative size ``scale``."""
    psi = np.asarray(psi, dtype=complex)
    g = rng.normal(size=psi.size) + 1j * rng.normal(size=psi.size)
    v = psi + scale * g / np.linalg.norm(g)
    return v / np.linalg.norm(v)
