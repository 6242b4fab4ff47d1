"""Finite nets of pure states with a proven covering radius.

The radius is measured in trace distance ``sqrt(1 - |<a|b>|^2)``: every pure
state lies within that distance of some net point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np


@dataclass(frozen=True, eq=False)
class StateNet:
    states: np.ndarray  # (N, d) unit vectors
    radius: float

    def __len__(self) -> int:
        return self.states.shape[0]


def _ring_counts(rings: int) -> list[int]:
    counts = []
    for k in range(rings + 1):
        theta = math.pi * k / rings
        counts.append(max(1, math.ceil(2 * rings * math.sin(theta) - 1e-12)))
    return counts


@lru_cache(maxsize=32)
def bloch_net(rings: int) -> StateNet:
    """Rings of constant polar angle on the Bloch sphere.

    Ring ``k`` sits at polar angle ``pi k / K`` and holds at least
    ``2 K sin(theta_k)`` equally spaced points. Any Bloch vector is within
    chord ``pi / (2K)`` of the nearest ring and then within chord
    ``pi / (2K)`` of a point on it, so the Bloch-vector distance is at most
    ``pi / K`` and the trace distance (half of it) at most ``pi / (2K)``.
    """
    if rings < 1:
        raise ValueError("need at least one ring")
    pts = []
    for k, count in enumerate(_ring_counts(rings)):
        theta = math.pi * k / rings
        for j in range(count):
            phi = 2 * math.pi * j / count
            pts.append((math.cos(theta / 2), math.sin(theta / 2) * np.exp(1j * phi)))
    states = np.array(pts, dtype=complex)
    states.flags.writeable = False
    return StateNet(states, math.pi / (2 * rings))


def rings_for_points(points: int) -> int:
    """Largest ring count whose Bloch net has at most ``points`` states (>= 1)."""
    k = 1
    while sum(_ring_counts(k + 1)) <= points:
        k += 1
    return k


def qubit_net(points: int = 10_000) -> StateNet:
    return bloch_net(rings_for_points(points))


@lru_cache(maxsize=16)
def hyperspherical_net(dim: int, steps: int) -> StateNet:
    """Net for pure states in ``C^dim`` on a product grid of angles.

    Amplitudes are ``r_k exp(i phi_k)`` with ``r`` on the positive orthant of
    the unit sphere (``dim - 1`` hyperspherical angles in ``[0, pi/2]``) and
    ``phi_0 = 0``. Moving one angle by ``h`` moves the vector by at most ``h``
    in Euclidean norm, so the net radius is at most the sum of half-steps
    over all ``2 (dim - 1)`` angles; trace distance is bounded by the
    Euclidean distance.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    polar_step = (math.pi / 2) / max(steps - 1, 1)
    polar = np.linspace(0, math.pi / 2, steps)
    phase_step = 2 * math.pi / steps
    phase = np.arange(steps) * phase_step
    vecs = []
    for angles in product(polar, repeat=dim - 1):
        r = np.empty(dim)
        s = 1.0
        for i, a in enumerate(angles):
            r[i] = s * math.cos(a)
            s *= math.sin(a)
        r[-1] = s
        for phases in product(phase, repeat=dim - 1):
            vecs.append(r * np.exp(1j * np.concatenate(([0.0], phases))))
    states = np.array(vecs, dtype=complex)
    states.flags.writeable = False
    radius = min(1.0, (dim - 1) * (polar_step / 2 + phase_step / 2))
    return StateNet(states, radius)


def state_net(dim: int, points: int = 10_000) -> StateNet:
    """Covering net of roughly ``points`` pure states in ``C^dim``."""
    if dim == 1:
        return StateNet(np.ones((1, 1), dtype=complex), 0.0)
    if dim == 2:
        return qubit_net(points)
    steps = max(2, int(points ** (1.0 / (2 * (dim - 1)))))
    return hyperspherical_net(dim, steps)


def vector_from_params(x: np.ndarray, dim: int) -> np.ndarray:
    """Unit vector from ``2*dim`` unconstrained reals (real parts, then imaginary)."""
    v = np.asarray(x[:dim]) + 1j * np.asarray(x[dim : 2 * dim])
    n = np.linalg.norm(v)
    if n < 1e-12:
        v = np.zeros(dim, dtype=complex)
        v[0] = 1.0
        return v
    return v / n


def params_from_vector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag])
