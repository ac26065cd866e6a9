"""Finite-dimensional Ito *-algebra of stochastic differentials.

A differential is stored as a quadruple of blocks acting between the two
scalar slots and an internal space of dimension ``k_dim``: the ``scalar``
block is the dt component, ``col`` couples into the internal space
(creation), ``row`` couples out of it (annihilation), and ``block`` acts
inside it (exchange).  Multiplication is the Hudson-Parthasarathy dot
contraction over the internal index; the involution is the blockwise
pseudo-Hermitian transpose.  The algebra of Newton calculus, the Wiener
process and the compensated Poisson process all embed as small instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ItoElement",
    "ItoAlgebraBasis",
    "ClosureReport",
    "hp_product",
    "flat",
    "mean",
    "death_element",
    "wiener_element",
    "poisson_element",
    "canonical_element",
    "zero_element",
    "check_closure",
]


@dataclass(frozen=True)
class ItoElement:
    """One stochastic differential in quadruple-block form.

    Immutable; ``row`` and ``col`` are 1-D arrays of length ``k_dim`` and
    ``block`` is ``k_dim x k_dim``.  Linear combinations are supported via
    the usual operators; products go through :func:`hp_product`.
    """

    scalar: complex
    row: np.ndarray
    col: np.ndarray
    block: np.ndarray

    def __post_init__(self):
        row = np.array(self.row, dtype=complex).reshape(-1)
        col = np.array(self.col, dtype=complex).reshape(-1)
        k = row.shape[0]
        block = np.array(self.block, dtype=complex).reshape(k, k) if k else \
            np.zeros((0, 0), dtype=complex)
        if col.shape[0] != k:
            raise ValueError(
                f"row has length {k} but col has length {col.shape[0]}")
        for arr in (row, col, block):
            arr.setflags(write=False)
        object.__setattr__(self, "scalar", complex(self.scalar))
        object.__setattr__(self, "row", row)
        object.__setattr__(self, "col", col)
        object.__setattr__(self, "block", block)

    @property
    def k_dim(self) -> int:
        return self.row.shape[0]

    def __add__(self, other: "ItoElement") -> "ItoElement":
        if self.k_dim != other.k_dim:
            raise ValueError("k_dim mismatch in addition")
        return ItoElement(self.scalar + other.scalar, self.row + other.row,
                          self.col + other.col, self.block + other.block)

    def __sub__(self, other: "ItoElement") -> "ItoElement":
        return self + (-1.0) * other

    def __mul__(self, c) -> "ItoElement":
        c = complex(c)
        return ItoElement(c * self.scalar, c * self.row, c * self.col,
                          c * self.block)

    __rmul__ = __mul__

    def __neg__(self) -> "ItoElement":
        return (-1.0) * self

    def norm(self) -> float:
        return float(np.sqrt(abs(self.scalar) ** 2
                             + np.sum(np.abs(self.row) ** 2)
                             + np.sum(np.abs(self.col) ** 2)
                             + np.sum(np.abs(self.block) ** 2)))

    def isclose(self, other: "ItoElement", tol: float = 1e-12) -> bool:
        return self.k_dim == other.k_dim and (self - other).norm() <= tol

    def vector(self) -> np.ndarray:
        """Flatten the quadruple into a single coefficient vector."""
        return np.concatenate([[self.scalar], self.row, self.col,
                               self.block.ravel()])


def hp_product(a: ItoElement, b: ItoElement) -> ItoElement:
    """Hudson-Parthasarathy product: contract over the internal index only.

    The scalar of the result is row(a) . col(b); every block of the result
    pairs an internal-output block of ``a`` with an internal-input block of
    ``b``, which is what makes dt (pure scalar) annihilate everything.
    """
    if a.k_dim != b.k_dim:
        raise ValueError(f"k_dim mismatch: {a.k_dim} != {b.k_dim}")
    return ItoElement(
        scalar=a.row @ b.col,
        row=a.row @ b.block,
        col=a.block @ b.col,
        block=a.block @ b.block,
    )


def flat(a: ItoElement) -> ItoElement:
    """Pseudo-Hermitian involution: block -> block^dag, row and col swap
    under conjugation, scalar conjugates."""
    return ItoElement(
        scalar=np.conj(a.scalar),
        row=np.conj(a.col),
        col=np.conj(a.row),
        block=a.block.conj().T,
    )


def mean(a: ItoElement) -> complex:
    """The mean functional: coefficient of dt, i.e. the scalar block."""
    return a.scalar


def zero_element(k_dim: int) -> ItoElement:
    return ItoElement(0.0, np.zeros(k_dim), np.zeros(k_dim),
                      np.zeros((k_dim, k_dim)))


def death_element(k_dim: int) -> ItoElement:
    """The dt differential: scalar 1, all other blocks zero.

    It is self-adjoint, has mean 1, and annihilates every element under the
    HP product (Newton rule dt*anything = 0).
    """
    return ItoElement(1.0, np.zeros(k_dim), np.zeros(k_dim),
                      np.zeros((k_dim, k_dim)))


def wiener_element(alpha: complex, xi: complex) -> ItoElement:
    """alpha*dt + xi*dQ with dQ a standard Wiener increment (k_dim = 1).

    Together with dt this spans the second-order nilpotent algebra in which
    dQ*dQ = dt and triple products vanish.
    """
    return ItoElement(alpha, [xi], [xi], [[0.0]])


def poisson_element(alpha: complex, zeta: complex) -> ItoElement:
    """alpha*dt + zeta*dP with dP a compensated unit-rate Poisson increment.

    The blocks are (block, col, row) = (zeta, i*zeta, -i*zeta); products
    reproduce dP*dP = dP + dt.  The scalar carries alpha, the dt coefficient
    of the element itself.
    """
    return ItoElement(alpha, [-1j * zeta], [1j * zeta], [[zeta]])


_MU_INDICES = ("-", ".")
_NU_INDICES = ("+", ".")


def canonical_element(mu: str, nu: str, coefficient, k_dim: int | None = None
                      ) -> ItoElement:
    """A differential with a single nonzero block at position (mu, nu).

    ``mu`` is "-" or "." and ``nu`` is "+" or "."; "." addresses the internal
    index.  (".", ".") is exchange, (".", "+") creation, ("-", ".")
    annihilation and ("-", "+") the time differential.  ``coefficient`` must
    match the addressed block shape; scalars are accepted for k_dim 1.
    """
    if mu not in _MU_INDICES or nu not in _NU_INDICES:
        raise ValueError(f"malformed index pair ({mu!r}, {nu!r})")
    coeff = np.asarray(coefficient, dtype=complex)
    if k_dim is None:
        k_dim = coeff.shape[0] if coeff.ndim else 1
    z = zero_element(k_dim)
    if mu == "." and nu == ".":
        return ItoElement(0.0, z.row, z.col, coeff.reshape(k_dim, k_dim))
    if mu == "." and nu == "+":
        return ItoElement(0.0, z.row, coeff.reshape(k_dim), z.block)
    if mu == "-" and nu == ".":
        return ItoElement(0.0, coeff.reshape(k_dim), z.col, z.block)
    # mu == "-" and nu == "+": pure time component
    return ItoElement(complex(coeff.reshape(())), z.row, z.col, z.block)


@dataclass(frozen=True)
class ItoAlgebraBasis:
    """A finite list of elements sharing one k_dim, with labels."""

    elements: tuple
    labels: tuple

    def __init__(self, elements, labels=None):
        elements = tuple(elements)
        if not elements:
            raise ValueError("basis must be nonempty")
        k = elements[0].k_dim
        for e in elements:
            if e.k_dim != k:
                raise ValueError("inconsistent k_dim across basis elements")
        if labels is None:
            labels = tuple(f"e{i}" for i in range(len(elements)))
        else:
            labels = tuple(str(s) for s in labels)
            if len(labels) != len(elements):
                raise ValueError("labels and elements differ in length")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "labels", labels)

    @property
    def k_dim(self) -> int:
        return self.elements[0].k_dim

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class ClosureReport:
    """Result of a span-closure check over a basis.

    ``product_coeffs[i, j]`` expands element_i * element_j in the basis,
    ``flat_coeffs[i]`` expands the involution of element_i, and the residuals
    are relative least-squares defects (0 for an exactly representable
    target).  ``closed`` additionally requires the death element to lie in
    the span, since dt belongs to every Ito algebra.
    """

    labels: tuple
    tol: float
    products_closed: bool
    death_in_span: bool
    closed: bool
    worst_residual: float
    flat_coeffs: np.ndarray
    flat_residuals: np.ndarray
    product_coeffs: np.ndarray
    product_residuals: np.ndarray
    death_coeffs: np.ndarray
    death_residual: float

    def to_dict(self) -> dict:
        def c2pair(z):
            return [float(np.real(z)), float(np.imag(z))]

        nb = len(self.labels)
        return {
            "labels": list(self.labels),
            "tol": self.tol,
            "closed": self.closed,
            "products_closed": self.products_closed,
            "death_in_span": self.death_in_span,
            "worst_residual": self.worst_residual,
            "death": {
                "coefficients": [c2pair(z) for z in self.death_coeffs],
                "residual": self.death_residual,
            },
            "flat": [
                {
                    "label": self.labels[i],
                    "coefficients": [c2pair(z) for z in self.flat_coeffs[i]],
                    "residual": float(self.flat_residuals[i]),
                }
                for i in range(nb)
            ],
            "products": [
                {
                    "left": self.labels[i],
                    "right": self.labels[j],
                    "coefficients": [c2pair(z)
                                     for z in self.product_coeffs[i, j]],
                    "residual": float(self.product_residuals[i, j]),
                }
                for i in range(nb)
                for j in range(nb)
            ],
        }


def _expand_in_span(span_matrix: np.ndarray, target: np.ndarray):
    """Least-squares coefficients of ``target`` in the span, with relative
    residual (1.0 means fully outside the span, 0 means exact)."""
    tnorm = float(np.linalg.norm(target))
    if tnorm == 0.0:
        return np.zeros(span_matrix.shape[1], dtype=complex), 0.0
    coeffs, *_ = np.linalg.lstsq(span_matrix, target, rcond=None)
    resid = float(np.linalg.norm(span_matrix @ coeffs - target)) / tnorm
    return coeffs, resid


def check_closure(basis: ItoAlgebraBasis, tol: float = 1e-10) -> ClosureReport:
    """Verify that involutions and pairwise HP products stay in the span.

    Expansion is by least squares on the flattened quadruples; the report
    carries the structure constants, every residual, and whether the death
    element is representable.
    """
    elements = basis.elements
    nb = len(elements)
    span = np.stack([e.vector() for e in elements], axis=1)

    flat_coeffs = np.zeros((nb, nb), dtype=complex)
    flat_residuals = np.zeros(nb)
    for i, e in enumerate(elements):
        flat_coeffs[i], flat_residuals[i] = _expand_in_span(
            span, flat(e).vector())

    product_coeffs = np.zeros((nb, nb, nb), dtype=complex)
    product_residuals = np.zeros((nb, nb))
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            product_coeffs[i, j], product_residuals[i, j] = _expand_in_span(
                span, hp_product(a, b).vector())

    death_coeffs, death_residual = _expand_in_span(
        span, death_element(basis.k_dim).vector())

    worst = float(max(flat_residuals.max(), product_residuals.max()))
    products_closed = worst <= tol
    death_in_span = death_residual <= tol
    return ClosureReport(
        labels=basis.labels,
        tol=tol,
        products_closed=products_closed,
        death_in_span=death_in_span,
        closed=products_closed and death_in_span,
        worst_residual=worst,
        flat_coeffs=flat_coeffs,
        flat_residuals=flat_residuals,
        product_coeffs=product_coeffs,
        product_residuals=product_residuals,
        death_coeffs=death_coeffs,
        death_residual=float(death_residual),
    )
