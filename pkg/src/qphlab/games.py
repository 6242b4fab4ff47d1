"""Values of alternately quantified proof games.

``E`` (exists) registers maximize the acceptance probability and ``A``
(forall) registers minimize it, in prefix order. Classical games are solved
exactly by enumeration. For pure-state games the innermost register is
solved exactly by an extreme eigenvalue of the conditioned operator; outer
registers are searched over a covering net of pure states.

Certification rests on one fact: for ``0 <= M <= I`` the value of any
subgame is 1-Lipschitz in each fixed proof with respect to trace distance,
because ``|Tr(M (rho - sigma) (x) X)| <= D(rho, sigma)`` for every state ``X``
and max/min preserve the Lipschitz constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .grids import params_from_vector, state_net, vector_from_params
from .linalg import HermitianOp, QState
from .verifier import AcceptOperator, ProofLike, QuantifiedGame, _as_proof_parts

DEFAULT_ENUMERATION_CAP = 2**20


class EnumerationCapError(ValueError):
    pass


# ---------------------------------------------------------------------------
# classical games


def _register_bits(dims: Sequence[int]) -> list[int]:
    bits = []
    for d in dims:
        b = int(round(math.log2(d)))
        if 2**b != d:
            raise ValueError(f"classical register of dim {d} is not a whole number of bits")
        bits.append(b)
    return bits


def solve_classical_game(
    game: QuantifiedGame, proof_bits: Sequence[int] | None = None, cap: int = DEFAULT_ENUMERATION_CAP
) -> tuple[float, list[str]]:
    """Exact value and principal line of play of a classical-proof game.

    Ties go to the lexicographically smallest bit string.
    """
    if any(k != "classical" for k in game.kinds):
        raise ValueError("solve_classical_game needs classical registers")
    bits = list(proof_bits) if proof_bits is not None else _register_bits(game.dims)
    if [2**b for b in bits] != list(game.dims):
        raise ValueError(f"proof_bits {bits} do not match register dims {game.dims}")
    if int(np.prod(game.dims)) > cap:
        raise EnumerationCapError(f"{int(np.prod(game.dims))} proof tuples exceed cap {cap}")
    diag = np.clip(np.real(np.diag(game.accept.matrix)), 0.0, 1.0)
    dims = game.dims
    strides = [int(np.prod(dims[i + 1 :])) for i in range(len(dims))]

    def rec(level: int, offset: int) -> tuple[float, list[int]]:
        if level == len(dims):
            return float(diag[offset]), []
        best_val, best_line = None, None
        for y in range(dims[level]):
            val, line = rec(level + 1, offset + y * strides[level])
            better = (
                best_val is None
                or (game.prefix[level] == "E" and val > best_val)
                or (game.prefix[level] == "A" and val < best_val)
            )
            if better:
                best_val, best_line = val, [y] + line
        return best_val, best_line

    value, line = rec(0, 0)
    strings = [format(y, f"0{b}b") if b else "" for y, b in zip(line, bits)]
    return value, strings


def classical_game_value(
    game: QuantifiedGame, proof_bits: Sequence[int] | None = None, cap: int = DEFAULT_ENUMERATION_CAP
) -> float:
    return solve_classical_game(game, proof_bits, cap)[0]


# ---------------------------------------------------------------------------
# conditioning


def _vector_of(p: ProofLike, d: int) -> np.ndarray:
    part = _as_proof_parts([p], [d])[0]
    if part.ndim != 1:
        raise ValueError("conditioning needs pure or classical proofs")
    return part


def conditioned_operator(M: AcceptOperator, fixed: Sequence[ProofLike]) -> HermitianOp:
    """Contract the leading registers of ``M`` against the given pure proofs."""
    k = len(fixed)
    if k > len(M.dims):
        raise ValueError("more fixed proofs than registers")
    mat = np.asarray(M.matrix)
    for p, d in zip(fixed, M.dims[:k]):
        v = _vector_of(p, d)
        rest = mat.shape[0] // d
        t = mat.reshape(d, rest, d, rest)
        mat = np.einsum("a,aibj,b->ij", v.conj(), t, v)
    rest_dims = M.dims[k:] or (1,)
    return HermitianOp(0.5 * (mat + mat.conj().T), rest_dims)


def _condition_batch(mat: np.ndarray, d: int, states: np.ndarray) -> np.ndarray:
    """Conditioned operators for a batch of leading-register states ``(G, d)``."""
    rest = mat.shape[0] // d
    t = mat.reshape(d, rest, d, rest)
    half = np.einsum("ga,aibj->gibj", states.conj(), t)
    return np.einsum("gibj,gb->gij", half, states)


# ---------------------------------------------------------------------------
# quantum games


@dataclass(frozen=True, eq=False)
class GameResult:
    """Value of a quantum game with a bracket on the true value.

    ``value`` is attained by the recorded line of play (up to the inner
    levels' own gaps); the true value lies in ``[lower, upper]`` when
    ``certified`` is set, and ``|value - true| <= gap``.
    """

    value: float
    gap: float
    lower: float
    upper: float
    strategy: tuple[QState, ...] = field(default=())
    mode: str = "certified"
    certified: bool = True
    restarts: int = 0


@dataclass
class _Node:
    est: float
    lo: float
    hi: float
    line: list


def _innermost(mat: np.ndarray, q: str) -> _Node:
    vals, vecs = np.linalg.eigh(mat)
    k = -1 if q == "E" else 0
    v = float(vals[k])
    return _Node(v, v, v, [vecs[:, k]])


def _local_search(f, x0: np.ndarray, sign: float):
    """Minimize ``sign * f`` from ``x0``; return (x, f(x))."""
    res = minimize(lambda x: sign * f(x), x0, method="L-BFGS-B")
    return res.x, f(res.x)


class _Solver:
    def __init__(self, dims, prefix, mode, grid_points, rng, restarts, refine):
        self.dims = tuple(dims)
        self.prefix = tuple(prefix)
        self.mode = mode
        self.grid_points = grid_points
        self.rng = rng
        self.restarts = restarts
        self.refine = refine

    def points_for(self, level: int) -> int:
        gp = self.grid_points
        if isinstance(gp, (list, tuple)):
            return int(gp[level])
        # nested outer levels multiply the work, so shrink deeper nets
        return int(gp) if level == len(self.dims) - 2 else max(16, int(round(gp ** 0.5)))

    def value_fn(self, mat: np.ndarray, level: int):
        d = self.dims[level]

        def f(x):
            v = vector_from_params(x, d)
            sub = np.einsum("a,aibj,b->ij", v.conj(), mat.reshape(d, -1, d, mat.shape[0] // d), v)
            return self.solve(0.5 * (sub + sub.conj().T), level + 1).est

        return f

    def solve(self, mat: np.ndarray, level: int) -> _Node:
        q = self.prefix[level]
        if level == len(self.dims) - 1:
            return _innermost(mat, q)
        if self.mode == "heuristic":
            return self._heuristic(mat, level)
        return self._certified(mat, level)

    def _pick(self, nodes: list[_Node], q: str) -> int:
        ests = np.array([n.est for n in nodes])
        # argmax/argmin return the first (smallest-index) optimum
        return int(np.argmax(ests) if q == "E" else np.argmin(ests))

    def _certified(self, mat: np.ndarray, level: int) -> _Node:
        d = self.dims[level]
        q = self.prefix[level]
        net = state_net(d, self.points_for(level))
        subs = _condition_batch(mat, d, net.states)
        subs = 0.5 * (subs + subs.conj().transpose(0, 2, 1))
        if level + 1 == len(self.dims) - 1:
            vals, vecs = np.linalg.eigh(subs)
            k = -1 if self.prefix[level + 1] == "E" else 0
            inner = vals[:, k]
            nodes = None
            los = his = ests = inner
        else:
            nodes = [self.solve(s, level + 1) for s in subs]
            ests = np.array([n.est for n in nodes])
            los = np.array([n.lo for n in nodes])
            his = np.array([n.hi for n in nodes])
        g = int(np.argmax(ests) if q == "E" else np.argmin(ests))
        if q == "E":
            lo, hi = float(np.max(los)), float(np.max(his)) + net.radius
        else:
            lo, hi = float(np.min(los)) - net.radius, float(np.min(his))
        best_state = net.states[g]
        if nodes is None:
            est = float(ests[g])
            tail = [vecs[g][:, k]]
        else:
            est = nodes[g].est
            tail = nodes[g].line
        if self.refine and nodes is None and d >= 2:
            f = self.value_fn(mat, level)
            x, val = _local_search(f, params_from_vector(best_state), -1.0 if q == "E" else 1.0)
            if (q == "E" and val > est) or (q == "A" and val < est):
                best_state = vector_from_params(x, d)
                est = float(val)
                sub = np.einsum("a,aibj,b->ij", best_state.conj(), mat.reshape(d, -1, d, mat.shape[0] // d), best_state)
                tail = _innermost(0.5 * (sub + sub.conj().T), self.prefix[level + 1]).line
                # an exactly evaluated point tightens the achievable side of the bracket
                if q == "E":
                    lo = max(lo, est)
                else:
                    hi = min(hi, est)
        est = min(max(est, lo), hi)
        return _Node(est, lo, hi, [best_state] + tail)

    def _heuristic(self, mat: np.ndarray, level: int) -> _Node:
        d = self.dims[level]
        q = self.prefix[level]
        f = self.value_fn(mat, level)
        sign = -1.0 if q == "E" else 1.0
        best_x, best_val = None, None
        for _ in range(self.restarts):
            x0 = self.rng.normal(size=2 * d)
            x, val = _local_search(f, x0, sign)
            if best_val is None or (q == "E" and val > best_val) or (q == "A" and val < best_val):
                best_x, best_val = x, val
        state = vector_from_params(best_x, d)
        sub = np.einsum("a,aibj,b->ij", state.conj(), mat.reshape(d, -1, d, mat.shape[0] // d), state)
        node = self.solve(0.5 * (sub + sub.conj().T), level + 1)
        return _Node(node.est, float("nan"), float("nan"), [state] + node.line)


def purify_game(game: QuantifiedGame) -> QuantifiedGame:
    """Replace each mixed register of dim ``d`` by a pure register of dim ``d*d``.

    The verifier acts on the first half of the doubled register and ignores
    the purifying half, so every mixed proof is reachable as a reduced state.
    """
    dims = list(game.dims)
    mat = np.asarray(game.accept.matrix)
    sub_dims: list[int] = []
    new_dims: list[int] = []
    for d, kind in zip(dims, game.kinds):
        if kind == "mixed":
            sub_dims += [d, d]
            new_dims.append(d * d)
        else:
            sub_dims.append(d)
            new_dims.append(d)
    # build M (x) I on (registers..., purifiers...) then interleave each purifier after its register
    n_mixed = sum(k == "mixed" for k in game.kinds)
    if n_mixed == 0:
        return QuantifiedGame(game.accept, game.prefix, tuple("pure" for _ in dims))
    pur_dims = [d for d, k in zip(dims, game.kinds) if k == "mixed"]
    big = np.kron(mat, np.eye(int(np.prod(pur_dims))))
    order_dims = dims + pur_dims
    perm = []
    pi = len(dims)
    for i, kind in enumerate(game.kinds):
        perm.append(i)
        if kind == "mixed":
            perm.append(pi)
            pi += 1
    from .linalg import permute_subsystems

    big = permute_subsystems(big, order_dims, perm)
    acc = AcceptOperator(big, new_dims, game.accept.names, check=False)
    return QuantifiedGame(acc, game.prefix, tuple("pure" for _ in dims))


def quantum_game_value(
    game: QuantifiedGame,
    mode: str = "certified",
    grid_points: int | Sequence[int] = 10_000,
    restarts: int = 12,
    rng: np.random.Generator | None = None,
    refine: bool = True,
) -> GameResult:
    """Value of a pure- (or mixed-, via purification) proof game.

    Certified mode requires every register except the innermost to have
    dimension at most 4 (two qubits). Heuristic mode uses random restarts of
    local search at every outer level and reports no bracket.
    """
    if mode not in ("certified", "heuristic"):
        raise ValueError(f"unknown mode {mode!r}")
    if any(k == "classical" for k in game.kinds):
        raise ValueError("use classical_game_value for classical registers")
    mixed = any(k == "mixed" for k in game.kinds)
    if mixed:
        game = purify_game(game)
    dims = game.dims
    if mode == "certified" and any(d > 4 for d in dims[:-1]):
        raise ValueError("certified mode needs outer registers of at most two qubits")
    rng = rng if rng is not None else np.random.default_rng(0)
    solver = _Solver(dims, game.prefix, mode, grid_points, rng, restarts, refine)
    node = solver.solve(np.asarray(game.accept.matrix), 0)
    strategy = tuple(QState.normalized(v) for v in node.line)
    if mode == "heuristic" and len(dims) > 1:
        return GameResult(node.est, float("nan"), float("nan"), float("nan"), strategy, "heuristic", False, restarts)
    gap = max(node.hi - node.est, node.est - node.lo)
    # with purified mixed registers beyond one outer level we do not claim exactness
    certified = not (mixed and len(dims) > 2)
    return GameResult(node.est, gap, node.lo, node.hi, strategy, mode if certified else "heuristic", certified)
