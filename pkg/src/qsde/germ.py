"""Germ matrices of quantum stochastic master equations.

A germ is the matrix of maps multiplying the noise differentials of an
operator evolution equation: a corner map ``gamma`` (the ordinary Lindblad
generator), row and column families ``gamma_up``/``gamma_dn`` coupling to
creation and annihilation noise, and an exchange block ``gamma_blk``.  This
module builds germs from Lindblad-structured operator data, assembles the
dissipation form over a spanning set of test operators, decides conditional
complete positivity (by the dissipation spectrum and, independently, by the
constrained block form), and constructs the pseudo-Hilbert dilation whose
representation, derivation and coboundary factorize the germ through an
indefinite metric.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DilationError
from .linalg import (dagger, frob, hermiticity_defect, matrix_units,
                     min_eig_hermitian, null_space_basis, spanning_ops)

__all__ = [
    "StructuralModel",
    "Germ",
    "DissipationMatrix",
    "CcpVerdict",
    "DilationData",
    "build_germ",
    "apply_lambda",
    "dissipation_matrix",
    "structural_dissipation_factor",
    "check_ccp",
    "kolmogorov_dilation",
    "verify_dilation",
    "pseudo_adjoint",
    "tamper_exchange_sign",
]

MatrixMap = Callable[[np.ndarray], np.ndarray]

_HERM_RTOL = 1e-12
_PSD_RTOL = 1e-10


def _square(name: str, m, n: int) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.shape != (n, n):
        raise ValueError(f"{name} must be {n}x{n}, got {m.shape}")
    return m


@dataclass(frozen=True)
class StructuralModel:
    """Operator data (H, L, Ln, Kn, D) of a Lindblad-structured generator.

    ``L`` holds ``kraus_mult`` operators L^i, ``Ln[c][i]`` the exchange
    couplings of noise channel c.  ``Kn`` defaults to sum_i L^i+ Ln[c][i]
    and ``D`` to zero, the martingale normalization; a nonzero ``D`` must be
    Hermitian and negative semidefinite.  The drift K is derived as
    iH + (sum_i L^i+ L^i - D)/2.
    """

    n: int
    d: int
    kraus_mult: int
    H: np.ndarray
    L: tuple
    Ln: tuple
    Kn: tuple | None = None
    D: np.ndarray | None = None

    def __post_init__(self):
        n, d, dp = int(self.n), int(self.d), int(self.kraus_mult)
        if n < 1 or d < 1 or dp < 1:
            raise ValueError("n, d and kraus_mult must be positive")
        H = _square("H", self.H, n)
        if hermiticity_defect(H) > _HERM_RTOL:
            raise ValueError("H is not Hermitian within tolerance")
        L = tuple(_square(f"L[{i}]", x, n) for i, x in enumerate(self.L))
        if len(L) != dp:
            raise ValueError(f"expected {dp} operators in L, got {len(L)}")
        if len(self.Ln) != d:
            raise ValueError(f"expected {d} rows in Ln, got {len(self.Ln)}")
        Ln = tuple(
            tuple(_square(f"Ln[{c}][{i}]", x, n) for i, x in enumerate(row))
            for c, row in enumerate(self.Ln))
        for c, row in enumerate(Ln):
            if len(row) != dp:
                raise ValueError(f"Ln[{c}] must hold {dp} operators")
        Kn = self.Kn
        if Kn is not None:
            Kn = tuple(_square(f"Kn[{c}]", x, n) for c, x in enumerate(Kn))
            if len(Kn) != d:
                raise ValueError(f"expected {d} operators in Kn")
        D = self.D
        if D is not None:
            D = _square("D", D, n)
            if hermiticity_defect(D) > _HERM_RTOL:
                raise ValueError("D is not Hermitian within tolerance")
            scale = max(frob(D), 1.0)
            if float(np.linalg.eigvalsh(0.5 * (D + dagger(D)))[-1]) \
                    > _PSD_RTOL * scale:
                raise ValueError("D must be negative semidefinite")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "kraus_mult", dp)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "Ln", Ln)
        object.__setattr__(self, "Kn", Kn)
        object.__setattr__(self, "D", D)

    @property
    def D_effective(self) -> np.ndarray:
        return self.D if self.D is not None else np.zeros((self.n, self.n),
                                                          dtype=complex)

    @property
    def K(self) -> np.ndarray:
        """Drift operator iH + (sum_i L^i+ L^i - D)/2."""
        acc = sum(dagger(li) @ li for li in self.L)
        return 1j * self.H + 0.5 * (acc - self.D_effective)

    @property
    def Kn_effective(self) -> tuple:
        if self.Kn is not None:
            return self.Kn
        return tuple(
            sum(dagger(li) @ lni for li, lni in zip(self.L, self.Ln[c]))
            for c in range(self.d))

    def phi(self, B: np.ndarray) -> np.ndarray:
        """The completely positive corner sum_i L^i+ B L^i."""
        return sum(dagger(li) @ B @ li for li in self.L)


@dataclass(frozen=True)
class Germ:
    """Matrix of maps (gamma, gamma_up, gamma_dn, gamma_blk) on M_n.

    Fields hold callables: ``gamma(B)``, ``gamma_up[m](B)``,
    ``gamma_dn[c](B)`` and ``gamma_blk[m][c](B)`` (0-based channel indices).
    ``model`` is retained when the germ was built from structural data and
    is needed by the minimal-solution iteration.
    """

    n: int
    d: int
    gamma: MatrixMap
    gamma_up: tuple
    gamma_dn: tuple
    gamma_blk: tuple
    model: StructuralModel | None = None

    def big_gamma(self, B: np.ndarray) -> np.ndarray:
        """The full (1+d)n x (1+d)n germ block matrix evaluated at B."""
        n, d = self.n, self.d
        out = np.zeros(((1 + d) * n, (1 + d) * n), dtype=complex)
        out[:n, :n] = self.gamma(B)
        for c in range(d):
            out[:n, (1 + c) * n:(2 + c) * n] = self.gamma_dn[c](B)
            out[(1 + c) * n:(2 + c) * n, :n] = self.gamma_up[c](B)
            for m in range(d):
                out[(1 + c) * n:(2 + c) * n, (1 + m) * n:(2 + m) * n] = \
                    self.gamma_blk[c][m](B)
        return out

    def exchange_at_identity(self) -> np.ndarray:
        """The d*n x d*n block matrix [gamma_blk[m][c](I)], which must be
        positive semidefinite for a completely positive exchange part."""
        n, d = self.n, self.d
        eye = np.eye(n, dtype=complex)
        out = np.zeros((d * n, d * n), dtype=complex)
        for m in range(d):
            for c in range(d):
                out[m * n:(m + 1) * n, c * n:(c + 1) * n] = \
                    self.gamma_blk[m][c](eye)
        return out


def build_germ(model: StructuralModel) -> Germ:
    """Assemble the germ maps of a Lindblad-structured model.

    gamma(B)        = sum_i L^i+ B L^i - K+ B - B K
    gamma_up[m](B)  = sum_i Ln[m][i]+ B L^i - Kn[m]+ B
    gamma_dn[c](B)  = sum_i L^i+ B Ln[c][i] - B Kn[c]
    gamma_blk[m][c] = sum_i Ln[m][i]+ B Ln[c][i]
    """
    L = model.L
    Ln = model.Ln
    K = model.K
    Kd = dagger(K)
    Kn = model.Kn_effective
    Lnd = tuple(tuple(dagger(x) for x in row) for row in Ln)
    Ld = tuple(dagger(x) for x in L)

    def gamma(B):
        acc = -(Kd @ B) - B @ K
        for li, lid in zip(L, Ld):
            acc = acc + lid @ B @ li
        return acc

    def make_up(m):
        knd = dagger(Kn[m])

        def gamma_up(B):
            acc = -(knd @ B)
            for li, lmd in zip(L, Lnd[m]):
                acc = acc + lmd @ B @ li
            return acc

        return gamma_up

    def make_dn(c):
        kn = Kn[c]

        def gamma_dn(B):
            acc = -(B @ kn)
            for lid, lni in zip(Ld, Ln[c]):
                acc = acc + lid @ B @ lni
            return acc

        return gamma_dn

    def make_blk(m, c):
        def gamma_blk(B):
            acc = np.zeros((model.n, model.n), dtype=complex)
            for lmd, lni in zip(Lnd[m], Ln[c]):
                acc = acc + lmd @ B @ lni
            return acc

        return gamma_blk

    return Germ(
        n=model.n,
        d=model.d,
        gamma=gamma,
        gamma_up=tuple(make_up(m) for m in range(model.d)),
        gamma_dn=tuple(make_dn(c) for c in range(model.d)),
        gamma_blk=tuple(tuple(make_blk(m, c) for c in range(model.d))
                        for m in range(model.d)),
        model=model,
    )


def tamper_exchange_sign(germ: Germ) -> Germ:
    """Copy of ``germ`` with every exchange map negated.

    The result violates conditional complete positivity for any nontrivial
    exchange part; used to exercise the detector.
    """

    def negate(f):
        return lambda B: -f(B)

    return Germ(
        n=germ.n,
        d=germ.d,
        gamma=germ.gamma,
        gamma_up=germ.gamma_up,
        gamma_dn=germ.gamma_dn,
        gamma_blk=tuple(tuple(negate(f) for f in row)
                        for row in germ.gamma_blk),
        model=None,
    )


def apply_lambda(germ: Germ, mu, nu, B: np.ndarray) -> np.ndarray:
    """Evaluate lambda[mu][nu](B) = gamma[mu][nu](B) - B*delta[mu][nu].

    ``mu`` is "-" or a 1-based channel index; ``nu`` is "+" or a 1-based
    channel index.  Only matched channel pairs carry the Kronecker delta.
    """
    B = np.asarray(B, dtype=complex)
    d = germ.d

    def chan(idx, side):
        if not isinstance(idx, (int, np.integer)) or not 1 <= int(idx) <= d:
            raise ValueError(f"bad {side} index {idx!r}: expected 1..{d}")
        return int(idx) - 1

    if mu == "-" and nu == "+":
        return germ.gamma(B)
    if mu == "-":
        return germ.gamma_dn[chan(nu, "column")](B)
    if nu == "+":
        return germ.gamma_up[chan(mu, "row")](B)
    m, c = chan(mu, "row"), chan(nu, "column")
    out = germ.gamma_blk[m][c](B)
    if m == c:
        out = out - B
    return out


@dataclass(frozen=True)
class DissipationMatrix:
    """Hermitian dissipation form over test operators {X_k}.

    ``matrix`` has one (1+d)*n block row/column per test operator; the block
    at row sector (k, alpha) and column sector (l, beta) is the dissipator
    component pairing X_k with X_l, with alpha/beta = 0 addressing the
    scalar noise slot and alpha/beta = 1..d the channels.
    """

    n: int
    d: int
    test_ops: tuple
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def block(self, k: int, alpha: int, l: int, beta: int) -> np.ndarray:
        n, d = self.n, self.d
        r = (k * (1 + d) + alpha) * n
        c = (l * (1 + d) + beta) * n
        return self.matrix[r:r + n, c:c + n]


def dissipation_matrix(germ: Germ, test_ops) -> DissipationMatrix:
    """Assemble the dissipation form of ``germ`` over ``test_ops``.

    Component formulas, with P = X+ Z and D = gamma(I):

      channel-channel   gamma_blk[m][c](P)
      scalar-channel    gamma_dn[c](P) - X+ gamma_dn[c](Z)
      channel-scalar    the conjugate transpose of the mirrored block
      scalar-scalar     gamma(P) - X+ gamma(Z) - gamma(X)+ Z + X+ D Z
    """
    n, d = germ.n, germ.d
    ops = tuple(_square(f"test_ops[{k}]", X, n) for k, X in enumerate(test_ops))
    if not ops:
        raise ValueError("test_ops must be nonempty")
    eye = np.eye(n, dtype=complex)
    D = germ.gamma(eye)
    nops = len(ops)
    size = nops * (1 + d) * n
    M = np.zeros((size, size), dtype=complex)

    gam_X = [germ.gamma(X) for X in ops]
    gdn_X = [[germ.gamma_dn[c](X) for X in ops] for c in range(d)]
    dag_X = [dagger(X) for X in ops]

    def put(k, alpha, l, beta, blk):
        r = (k * (1 + d) + alpha) * n
        c = (l * (1 + d) + beta) * n
        M[r:r + n, c:c + n] = blk

    for k in range(nops):
        Xd = dag_X[k]
        for l in range(nops):
            Z = ops[l]
            P = Xd @ Z
            put(k, 0, l, 0,
                germ.gamma(P) - Xd @ gam_X[l] - dagger(gam_X[k]) @ Z
                + Xd @ D @ Z)
            for c in range(d):
                put(k, 0, l, 1 + c,
                    germ.gamma_dn[c](P) - Xd @ gdn_X[c][l])
            Pm = dag_X[l] @ ops[k]
            for m in range(d):
                put(k, 1 + m, l, 0,
                    dagger(germ.gamma_dn[m](Pm) - dag_X[l] @ gdn_X[m][k]))
            for m in range(d):
                for c in range(d):
                    put(k, 1 + m, l, 1 + c, germ.gamma_blk[m][c](P))
    return DissipationMatrix(n=n, d=d, test_ops=ops, matrix=M)


def structural_dissipation_factor(model: StructuralModel, test_ops
                                  ) -> np.ndarray:
    """Independent factor C with C+ C equal to the dissipation matrix.

    Column block (k, 0) is j(X_k) Lst - Lst X_k and column block (k, c) is
    j(X_k) Lnst[c], where j(B) stacks kraus_mult copies of B on the diagonal
    and Lst/Lnst stack the structural operators.  Valid for any
    Lindblad-structured germ; serves as the oracle for the assembled form.
    """
    n, d, dp = model.n, model.d, model.kraus_mult
    ops = tuple(_square(f"test_ops[{k}]", X, n) for k, X in enumerate(test_ops))
    Lst = np.vstack(model.L)
    Lnst = [np.vstack([model.Ln[c][i] for i in range(dp)]) for c in range(d)]

    def jrep(B):
        return np.kron(np.eye(dp), B)

    blocks = []
    for X in ops:
        jX = jrep(X)
        blocks.append(jX @ Lst - Lst @ X)
        for c in range(d):
            blocks.append(jX @ Lnst[c])
    return np.hstack(blocks)


@dataclass(frozen=True)
class CcpVerdict:
    """Outcome of the conditional-complete-positivity test.

    ``is_ccp``/``min_eig`` come from the dissipation-matrix spectrum;
    ``constrained_*`` from the germ block form restricted to tuples whose
    weighted sum of scalar components vanishes.  The two verdicts agree for
    any exactly assembled germ.
    """

    is_ccp: bool
    min_eig: float
    scale: float
    constrained_is_ccp: bool
    constrained_min_eig: float

    @property
    def agree(self) -> bool:
        return self.is_ccp == self.constrained_is_ccp

    def to_dict(self) -> dict:
        return {
            "is_ccp": self.is_ccp,
            "min_eig": self.min_eig,
            "scale": self.scale,
            "constrained_is_ccp": self.constrained_is_ccp,
            "constrained_min_eig": self.constrained_min_eig,
            "agree": self.agree,
        }


def _constrained_form_min_eig(germ: Germ, ops) -> float:
    """Smallest eigenvalue of the germ block form on the subspace where the
    scalar components eta_k satisfy sum_k X_k eta_k = 0."""
    n, d = germ.n, germ.d
    nops = len(ops)
    bw = (1 + d) * n
    G = np.zeros((nops * bw, nops * bw), dtype=complex)
    for k in range(nops):
        Xd = dagger(ops[k])
        for l in range(nops):
            G[k * bw:(k + 1) * bw, l * bw:(l + 1) * bw] = \
                germ.big_gamma(Xd @ ops[l])
    T = np.zeros((n, nops * bw), dtype=complex)
    for k in range(nops):
        T[:, k * bw:k * bw + n] = ops[k]
    P = null_space_basis(T)
    if P.shape[1] == 0:
        return 0.0
    R = dagger(P) @ G @ P
    return min_eig_hermitian(R)


def check_ccp(germ: Germ, test_ops=None, tol: float = _PSD_RTOL) -> CcpVerdict:
    """Decide conditional complete positivity of ``germ``.

    Computes the smallest eigenvalue of the dissipation matrix (verdict:
    nonnegative up to ``tol`` times the spectral scale) and independently the
    smallest eigenvalue of the constrained germ block form; both verdicts are
    reported and always returned.
    """
    ops = tuple(spanning_ops(germ.n)) if test_ops is None else \
        tuple(np.asarray(X, dtype=complex) for X in test_ops)
    dm = dissipation_matrix(germ, ops)
    H = 0.5 * (dm.matrix + dagger(dm.matrix))
    w = np.linalg.eigvalsh(H)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    min_eig = float(w[0]) if w.size else 0.0
    threshold = -tol * max(scale, np.finfo(float).tiny)
    cmin = _constrained_form_min_eig(germ, ops)
    return CcpVerdict(
        is_ccp=min_eig >= threshold,
        min_eig=min_eig,
        scale=scale,
        constrained_is_ccp=cmin >= threshold,
        constrained_min_eig=cmin,
    )


@dataclass(frozen=True)
class DilationData:
    """Numerical Kolmogorov dilation of a germ.

    ``j`` is a unital *-representation on the rank-r auxiliary space, ``k``
    the matching derivation, ``kstar`` its adjoint map, ``l`` the coboundary
    with gamma(B) = l(B) + D B.  ``G`` is the indefinite metric on the
    (n + r + n)-dimensional pseudo-Hilbert space, ``jmath`` the triangular
    block representation there, and ``Lop`` the operator whose G-adjoint
    sandwich reproduces the full germ block matrix.
    """

    n: int
    d: int
    rank: int
    j: MatrixMap
    k: MatrixMap
    kstar: MatrixMap
    l: MatrixMap
    L_circ: tuple
    L_minus: tuple
    D: np.ndarray
    G: np.ndarray
    G_inv: np.ndarray
    jmath: MatrixMap
    Lop: np.ndarray


def _validate_spanning_ops(ops, n: int) -> None:
    ref = spanning_ops(n)
    if len(ops) != len(ref) or any(
            not np.array_equal(a, b) for a, b in zip(ops, ref)):
        raise ValueError(
            "dilation requires the canonical test set: all matrix units of "
            "M_n in row-major order followed by the identity")


def kolmogorov_dilation(germ: Germ, test_ops=None, cutoff: float = 1e-12,
                        ccp_tol: float = _PSD_RTOL,
                        residual_gate: float = 1e-6) -> DilationData:
    """Factor the dissipation form and build the pseudo-Hilbert dilation.

    The dissipation matrix M over the matrix-unit test set is
    eigendecomposed; eigenvalues below ``cutoff`` times the largest fix the
    auxiliary rank r, and the square-root factor C (with C+ C = M) yields
    k and the channel couplings by reading off column blocks.  j(B) is then
    solved for by least squares from its action on the factor columns,
    with a residual gate that turns ill conditioning into an error.
    """
    n, d = germ.n, germ.d
    ops = tuple(spanning_ops(n)) if test_ops is None else \
        tuple(np.asarray(X, dtype=complex) for X in test_ops)
    _validate_spanning_ops(ops, n)

    verdict = check_ccp(germ, ops, tol=ccp_tol)
    if not verdict.is_ccp:
        raise DilationError(
            f"germ is not conditionally completely positive "
            f"(min_eig={verdict.min_eig:.3e}, scale={verdict.scale:.3e})")

    dm = dissipation_matrix(germ, ops)
    H = 0.5 * (dm.matrix + dagger(dm.matrix))
    w, U = np.linalg.eigh(H)
    wmax = float(w[-1]) if w.size else 0.0
    keep = w > cutoff * max(wmax, 0.0)
    wk = w[keep]
    Uk = U[:, keep]
    r = int(wk.size)
    sq = np.sqrt(wk)
    C = sq[:, None] * dagger(Uk)          # (r, N) with C+ C ~= M
    C_pinv = Uk / sq[None, :] if r else np.zeros((H.shape[0], 0))

    width = (1 + d) * n

    def col_block(op_index: int, alpha: int) -> np.ndarray:
        c0 = op_index * width + alpha * n
        return C[:, c0:c0 + n]

    k_basis = np.empty((n, n, r, n), dtype=complex)
    kch_basis = np.empty((d, n, n, r, n), dtype=complex)
    for p in range(n):
        for q in range(n):
            idx = p * n + q
            k_basis[p, q] = col_block(idx, 0)
            for c in range(d):
                kch_basis[c, p, q] = col_block(idx, 1 + c)
    id_index = n * n
    L_circ = tuple(col_block(id_index, 1 + c).copy() for c in range(d))

    def k_of(B):
        return np.einsum("pq,pqrm->rm", np.asarray(B, dtype=complex), k_basis)

    def kch_of(c, B):
        return np.einsum("pq,pqrm->rm", np.asarray(B, dtype=complex),
                         kch_basis[c])

    # j(B) from j(B) [k(Z) | kch(Z)] = [k(BZ) - k(B) Z | kch(BZ)] over all Z
    scaleC = max(frob(C), 1.0)
    j_basis = np.empty((n, n, r, r), dtype=complex)
    units = matrix_units(n)
    for p in range(n):
        for q in range(n):
            B = units[p * n + q]
            kB = k_basis[p, q]
            W = np.zeros_like(C)
            for l, Z in enumerate(ops):
                BZ = B @ Z
                c0 = l * width
                W[:, c0:c0 + n] = k_of(BZ) - kB @ Z
                for c in range(d):
                    W[:, c0 + (1 + c) * n:c0 + (2 + c) * n] = kch_of(c, BZ)
            jB = W @ C_pinv
            resid = frob(jB @ C - W)
            if resid > residual_gate * scaleC:
                raise DilationError(
                    f"representation solve ill-conditioned at unit ({p},{q}): "
                    f"residual {resid:.3e} exceeds "
                    f"{residual_gate:.1e} * {scaleC:.3e}")
            j_basis[p, q] = jB

    eye = np.eye(n, dtype=complex)
    D = germ.gamma(eye)
    L_minus = tuple(germ.gamma_dn[c](eye) for c in range(d))

    def j_of(B):
        return np.einsum("pq,pqab->ab", np.asarray(B, dtype=complex), j_basis)

    def l_of(B):
        B = np.asarray(B, dtype=complex)
        return germ.gamma(B) - D @ B

    def kstar_of(B):
        return dagger(k_of(dagger(np.asarray(B, dtype=complex))))

    dim = 2 * n + r
    G = np.zeros((dim, dim), dtype=complex)
    G[:n, n + r:] = eye
    G[n:n + r, n:n + r] = np.eye(r)
    G[n + r:, :n] = eye
    G[n + r:, n + r:] = D
    G_inv = np.zeros((dim, dim), dtype=complex)
    G_inv[:n, :n] = -D
    G_inv[:n, n + r:] = eye
    G_inv[n:n + r, n:n + r] = np.eye(r)
    G_inv[n + r:, :n] = eye

    def jmath_of(B):
        B = np.asarray(B, dtype=complex)
        out = np.zeros((dim, dim), dtype=complex)
        out[:n, :n] = B
        out[:n, n:n + r] = kstar_of(B)
        out[:n, n + r:] = l_of(B)
        out[n:n + r, n:n + r] = j_of(B)
        out[n:n + r, n + r:] = k_of(B)
        out[n + r:, n + r:] = B
        return out

    Lop = np.zeros((dim, (1 + d) * n), dtype=complex)
    Lop[n + r:, :n] = eye
    for c in range(d):
        Lop[:n, (1 + c) * n:(2 + c) * n] = L_minus[c]
        Lop[n:n + r, (1 + c) * n:(2 + c) * n] = L_circ[c]

    return DilationData(
        n=n, d=d, rank=r,
        j=j_of, k=k_of, kstar=kstar_of, l=l_of,
        L_circ=L_circ, L_minus=L_minus, D=D,
        G=G, G_inv=G_inv, jmath=jmath_of, Lop=Lop,
    )


def verify_dilation(dd: DilationData, germ: Germ, B, tol: float = 1e-8
                    ) -> float:
    """Round-trip residual of the dilation at ``B``.

    Returns the larger of two Frobenius deviations: the sandwiched block
    representation against the germ block matrix, and the metric-adjoint
    consistency of the block representation.  ``tol`` is the reference
    threshold callers compare against; the function only measures.
    """
    B = np.asarray(B, dtype=complex)
    jm = dd.jmath(B)
    lflat = dagger(dd.Lop) @ dd.G
    round_trip = frob(lflat @ jm @ dd.Lop - germ.big_gamma(B))
    flat_rep = frob(dd.jmath(dagger(B)) - dd.G_inv @ dagger(jm) @ dd.G)
    return max(round_trip, flat_rep)


def pseudo_adjoint(A, G) -> np.ndarray:
    """G-adjoint of A: inverse(G) A+ G.  Raises LinAlgError if G is singular."""
    A = np.asarray(A, dtype=complex)
    G = np.asarray(G, dtype=complex)
    return np.linalg.solve(G, dagger(A) @ G)
