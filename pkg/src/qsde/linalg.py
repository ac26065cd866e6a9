"""Small dense linear-algebra helpers shared across the package."""

from __future__ import annotations

import numpy as np
import scipy.linalg


def dagger(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.conj(np.swapaxes(a, -1, -2))


def frob(a) -> float:
    """Frobenius norm as a plain float."""
    return float(np.linalg.norm(a))


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential via Pade scaling-and-squaring (SciPy)."""
    return scipy.linalg.expm(np.asarray(a, dtype=complex))


def hermiticity_defect(a: np.ndarray) -> float:
    """Relative deviation of ``a`` from its conjugate transpose."""
    a = np.asarray(a)
    scale = max(frob(a), 1.0)
    return frob(a - dagger(a)) / scale


def matrix_units(n: int) -> list[np.ndarray]:
    """All n*n matrix units E_pq in row-major (p, q) order."""
    units = []
    for p in range(n):
        for q in range(n):
            e = np.zeros((n, n), dtype=complex)
            e[p, q] = 1.0
            units.append(e)
    return units


def spanning_ops(n: int) -> list[np.ndarray]:
    """The canonical spanning test set: all matrix units followed by I."""
    return matrix_units(n) + [np.eye(n, dtype=complex)]


def min_eig_hermitian(a: np.ndarray) -> float:
    """Smallest eigenvalue of (a + a^dag)/2."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    h = 0.5 * (a + dagger(a))
    return float(np.linalg.eigvalsh(h)[0])


def null_space_basis(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the kernel of ``a`` (columns), via SVD."""
    a = np.asarray(a, dtype=complex)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    tol = (s[0] if s.size else 0.0) * max(a.shape) * np.finfo(float).eps
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T
