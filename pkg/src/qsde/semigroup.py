"""Deterministic oracles: the averaged operator semigroup and the minimal
completely positive solution by iteration.

The Heisenberg evolution integrates dB/dt = gamma(B) with a fixed-step
fourth-order scheme on the materialized superoperator; the predual version
evolves states with the trace pairing preserved.  The minimal-solution
iteration integrates the vacuum-averaged Volterra equation

    Phi[m+1]_t(B) = W_t+ B W_t
                    + int_0^t Phi[m]_s( phi( W_(t-s)+ B W_(t-s) ) ) ds

with W_t = exp(-K t) and phi the completely positive corner of the model;
the iterates increase toward the semigroup and each increment stays
completely positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .germ import Germ
from .linalg import expm, matrix_units

__all__ = [
    "Superoperator",
    "EvolutionResult",
    "heisenberg_superoperator",
    "evolve_heisenberg",
    "evolve_schrodinger",
    "picard_minimal",
]


@dataclass(frozen=True)
class Superoperator:
    """A linear map on M_n with its materialized n^2 x n^2 matrix.

    Vectorization is row-major: vec(B)[p * n + q] = B[p, q].
    """

    n: int
    action: Callable[[np.ndarray], np.ndarray]
    matrix: np.ndarray

    @classmethod
    def from_map(cls, n: int, action) -> "Superoperator":
        mat = np.empty((n * n, n * n), dtype=complex)
        for i, unit in enumerate(matrix_units(n)):
            mat[:, i] = np.asarray(action(unit), dtype=complex).reshape(-1)
        return cls(n=n, action=action, matrix=mat)

    def __call__(self, B: np.ndarray) -> np.ndarray:
        vec = np.asarray(B, dtype=complex).reshape(-1)
        return (self.matrix @ vec).reshape(self.n, self.n)


def heisenberg_superoperator(germ: Germ) -> Superoperator:
    """Materialize the averaged generator B -> gamma(B)."""
    return Superoperator.from_map(germ.n, germ.gamma)


def _predual_matrix(mat: np.ndarray, n: int) -> np.ndarray:
    """Matrix of the map rho -> gamma*(rho) defined by the trace pairing
    tr(gamma*(rho) B) = tr(rho gamma(B))."""
    g4 = mat.reshape(n, n, n, n)
    return np.transpose(g4, (3, 2, 1, 0)).reshape(n * n, n * n)


def _rk4(mat: np.ndarray, v0: np.ndarray, tmax: float, steps: int
         ) -> np.ndarray:
    """Classical fourth-order fixed-step integration of v' = mat v,
    returning all steps+1 grid values."""
    h = tmax / steps
    out = np.empty((steps + 1, v0.size), dtype=complex)
    out[0] = v0
    v = v0
    for j in range(steps):
        k1 = mat @ v
        k2 = mat @ (v + 0.5 * h * k1)
        k3 = mat @ (v + 0.5 * h * k2)
        k4 = mat @ (v + h * k3)
        v = v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[j + 1] = v
    return out


@dataclass(frozen=True)
class EvolutionResult:
    """Grid values of one deterministic evolution."""

    grid: np.ndarray
    values: np.ndarray
    method: str
    steps: int

    def at(self, index: int) -> np.ndarray:
        return self.values[index]


def evolve_heisenberg(germ: Germ, B0, tmax: float, steps: int
                      ) -> EvolutionResult:
    """Integrate dB/dt = gamma(B) from B0 over [0, tmax]."""
    if steps < 1:
        raise ValueError("steps must be at least 1")
    n = germ.n
    B0 = np.asarray(B0, dtype=complex).reshape(n, n)
    sup = heisenberg_superoperator(germ)
    traj = _rk4(sup.matrix, B0.reshape(-1).copy(), float(tmax), int(steps))
    grid = np.linspace(0.0, float(tmax), int(steps) + 1)
    return EvolutionResult(grid=grid, values=traj.reshape(-1, n, n),
                           method="rk4", steps=int(steps))


def evolve_schrodinger(germ: Germ, rho0, tmax: float, steps: int
                       ) -> EvolutionResult:
    """Integrate the predual equation for states from rho0 over [0, tmax].

    rho0 must be positive semidefinite with unit trace; the solution is dual
    to the Heisenberg evolution under the trace pairing.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    n = germ.n
    rho0 = np.asarray(rho0, dtype=complex).reshape(n, n)
    if abs(np.trace(rho0) - 1.0) > 1e-10:
        raise ValueError("rho0 must have unit trace")
    if float(np.linalg.eigvalsh(0.5 * (rho0 + rho0.conj().T))[0]) < -1e-10:
        raise ValueError("rho0 must be positive semidefinite")
    sup = heisenberg_superoperator(germ)
    pred = _predual_matrix(sup.matrix, n)
    traj = _rk4(pred, rho0.reshape(-1).copy(), float(tmax), int(steps))
    grid = np.linspace(0.0, float(tmax), int(steps) + 1)
    return EvolutionResult(grid=grid, values=traj.reshape(-1, n, n),
                           method="rk4-predual", steps=int(steps))


def picard_minimal(germ: Germ, B0, tmax: float, steps: int, iters: int
                   ) -> list[EvolutionResult]:
    """Iterate the vacuum-averaged integral equation toward the minimal
    completely positive solution.

    Returns the iterates Phi[0]..Phi[iters] evaluated at B0 on the shared
    grid, Phi[0]_t(B) = W_t+ B W_t.  Quadrature is trapezoidal on the grid;
    the germ must carry its structural model (for K and the CP corner).
    """
    if germ.model is None:
        raise ValueError("picard_minimal needs a germ built from a "
                         "structural model")
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if iters < 0:
        raise ValueError("iters must be nonnegative")
    model = germ.model
    n = germ.n
    B0 = np.asarray(B0, dtype=complex).reshape(n, n)
    steps = int(steps)
    grid = np.linspace(0.0, float(tmax), steps + 1)
    dt = grid[1] - grid[0]
    K = model.K

    # superoperators of B -> W_t+ B W_t on the grid (row-major vec):
    # vec(A B C) = kron(A, C^T) vec(B)
    T_seq = np.empty((steps + 1, n * n, n * n), dtype=complex)
    for jdx, t in enumerate(grid):
        W = expm(-K * t)
        T_seq[jdx] = np.kron(W.conj().T, W.T)
    phi_mat = Superoperator.from_map(n, model.phi).matrix

    def values_of(seq):
        vecs = seq @ B0.reshape(-1)
        return vecs.reshape(-1, n, n)

    iterates = [T_seq]
    cur = T_seq
    for _ in range(int(iters)):
        amats = cur @ phi_mat
        nxt = T_seq.copy()
        for j in range(1, steps + 1):
            prods = amats[: j + 1] @ T_seq[j::-1]
            w = np.full(j + 1, dt)
            w[0] = 0.5 * dt
            w[-1] = 0.5 * dt
            nxt[j] = nxt[j] + np.tensordot(w, prods, axes=1)
        iterates.append(nxt)
        cur = nxt

    return [
        EvolutionResult(grid=grid, values=values_of(seq),
                        method="picard-trapezoid", steps=steps)
        for seq in iterates
    ]
