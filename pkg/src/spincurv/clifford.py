"""Clifford algebra representations and spinor-valued linear algebra.

Gamma matrices are anti-Hermitian and square to ``-1`` (Riemannian signature),
so that ``X.Y.psi + Y.X.psi = -2 <X, Y> psi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CliffordRep",
    "build_clifford_rep",
    "clifford_mul",
    "curvature_action",
    "spinor_curvature",
    "spinor_curvature_square_stats",
    "random_curvature_tensor",
    "constant_curvature_tensor",
    "riemann_symmetry_residual",
    "conjugated_rep",
]

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

SUPPORTED_DIMENSIONS = (3, 4, 5, 6)


@dataclass(frozen=True)
class CliffordRep:
    """Complex representation of the Clifford algebra of Euclidean R^n.

    Attributes:
        n: dimension of the underlying vector space.
        gamma: array of shape (n, N, N); ``gamma[a]`` is Clifford multiplication
            by the a-th basis vector.
    """

    n: int
    gamma: np.ndarray

    def __post_init__(self):
        self.gamma.setflags(write=False)

    @property
    def N(self) -> int:
        return self.gamma.shape[1]

    def clifford_residuals(self) -> tuple[float, float]:
        """Max anti-commutator and anti-Hermiticity residuals."""
        g = self.gamma
        eye = np.eye(self.N)
        anti = np.einsum("aij,bjk->abik", g, g) + np.einsum("bij,ajk->abik", g, g)
        anti += 2.0 * np.einsum("ab,ik->abik", np.eye(self.n), eye)
        herm = g + np.conj(np.transpose(g, (0, 2, 1)))
        return float(np.abs(anti).max()), float(np.abs(herm).max())


def _hermitian_gammas(n: int) -> list[np.ndarray]:
    # Hermitian generators with G_a G_b + G_b G_a = 2 delta_ab.
    if n == 2:
        return [_PAULI[0], _PAULI[1]]
    if n % 2 == 1:
        gams = _hermitian_gammas(n - 1)
        prod = np.eye(gams[0].shape[0], dtype=complex)
        for g in gams:
            prod = prod @ g
        # (i^k G_1...G_{2k}) is Hermitian and squares to one.
        return gams + [(1j) ** ((n - 1) // 2) * prod]
    gams = _hermitian_gammas(n - 2)
    eye = np.eye(gams[0].shape[0], dtype=complex)
    return [np.kron(_PAULI[0], g) for g in gams] + [
        np.kron(_PAULI[1], eye),
        np.kron(_PAULI[2], eye),
    ]


def build_clifford_rep(n: int) -> CliffordRep:
    """Build anti-Hermitian gamma matrices for R^n, 3 <= n <= 6.

    The construction doubles the spinor space every two dimensions using
    2x2 tensor blocks; odd dimensions append the (normalized) product of the
    even-dimensional generators. The spinor dimension is ``2**(n // 2)``.
    """
    if int(n) != n or n not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"unsupported dimension n={n}; expected one of {SUPPORTED_DIMENSIONS}")
    gamma = 1j * np.array(_hermitian_gammas(int(n)))
    return CliffordRep(n=int(n), gamma=gamma)


def conjugated_rep(rep: CliffordRep, unitary: np.ndarray) -> CliffordRep:
    """Return the equivalent representation ``U gamma U^dagger``."""
    g = np.einsum("ij,ajk,lk->ail", unitary, rep.gamma, np.conj(unitary))
    return CliffordRep(n=rep.n, gamma=g)


def clifford_mul(rep: CliffordRep, v, psi) -> np.ndarray:
    """Clifford product ``v . psi = sum_a v_a gamma_a psi``.

    ``v`` has trailing axis n and ``psi`` trailing axis N; leading axes
    broadcast.
    """
    v = np.asarray(v, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    mat = np.einsum("...a,aij->...ij", v, rep.gamma)
    return np.einsum("...ij,...j->...i", mat, psi)


def riemann_symmetry_residual(R: np.ndarray) -> float:
    """Max violation of the algebraic curvature tensor symmetries.

    Checks antisymmetry in each index pair, pair exchange and the first
    Bianchi identity; ``R`` has trailing shape (n, n, n, n).
    """
    R = np.asarray(R, dtype=float)
    ax = R.ndim - 4
    perm = lambda *p: tuple(range(ax)) + tuple(ax + i for i in p)  # noqa: E731
    res = [
        R + np.transpose(R, perm(1, 0, 2, 3)),
        R + np.transpose(R, perm(0, 1, 3, 2)),
        R - np.transpose(R, perm(2, 3, 0, 1)),
        R + np.transpose(R, perm(0, 2, 3, 1)) + np.transpose(R, perm(0, 3, 1, 2)),
    ]
    return float(max(np.abs(r).max() for r in res))


def spinor_curvature(rep: CliffordRep, R: np.ndarray) -> np.ndarray:
    """Endomorphisms ``(1/4) sum_{c,d} R[a, b, c, d] gamma_c gamma_d``.

    Returns shape (..., n, n, N, N), indexed by the frame pair (a, b).
    """
    g = rep.gamma
    gg = np.einsum("cij,djk->cdik", g, g)
    return 0.25 * np.einsum("...abcd,cdik->...abik", np.asarray(R, dtype=float), gg)


def curvature_action(rep: CliffordRep, R: np.ndarray, X: int, Y: int, psi, tol: float = 1e-8) -> np.ndarray:
    """Apply ``(1/4) sum R(X, Y, s_a, s_b) s_a . s_b . psi`` at a single point.

    Args:
        rep: Clifford representation.
        R: (n, n, n, n) curvature components in an orthonormal frame.
        X, Y: frame indices.
        psi: spinor with N components.
        tol: allowed violation of the curvature symmetries (scaled by max |R|).
    """
    R = np.asarray(R, dtype=float)
    scale = max(1.0, float(np.abs(R).max()))
    if riemann_symmetry_residual(R) > tol * scale:
        raise ValueError("supplied tensor violates the curvature symmetries")
    mat = 0.25 * np.einsum("cd,cij,djk->ik", R[X, Y], rep.gamma, rep.gamma)
    return mat @ np.asarray(psi, dtype=complex)


def spinor_curvature_square_stats(rep: CliffordRep, R: np.ndarray) -> dict:
    """Trace and norm of ``S = sum_{a,b} R^S(s_a, s_b)^2``.

    Returns a dict with ``trace_sum = -Tr S`` (equal to ``N/8 |R|^2``),
    ``hs_norm`` (Hilbert-Schmidt norm of S, bounded by ``sqrt(N/8) |R|^2``),
    ``op_norm`` (spectral norm of S, never above ``hs_norm``) and
    ``riemann_norm_sq``. Accepts leading batch axes.
    """
    RS = spinor_curvature(rep, R)
    S = np.einsum("...abij,...abjk->...ik", RS, RS)
    trace_sum = -np.real(np.trace(S, axis1=-2, axis2=-1))
    hs = np.linalg.norm(S, axis=(-2, -1))
    # S is Hermitian (sum of squares of anti-Hermitian matrices).
    op = np.abs(np.linalg.eigvalsh(0.5 * (S + np.conj(np.swapaxes(S, -1, -2))))).max(axis=-1)
    r2 = np.sum(np.asarray(R, dtype=float) ** 2, axis=(-4, -3, -2, -1))
    return {"trace_sum": trace_sum, "hs_norm": hs, "op_norm": op, "riemann_norm_sq": r2}


def project_curvature(T: np.ndarray) -> np.ndarray:
    """Project a 4-index array onto algebraic curvature tensors."""
    T = np.asarray(T, dtype=float)
    T = 0.5 * (T - T.transpose(1, 0, 2, 3))
    T = 0.5 * (T - T.transpose(0, 1, 3, 2))
    T = 0.5 * (T + T.transpose(2, 3, 0, 1))
    bianchi = (T + T.transpose(0, 2, 3, 1) + T.transpose(0, 3, 1, 2)) / 3.0
    return T - bianchi


def random_curvature_tensor(n: int, rng: np.random.Generator) -> np.ndarray:
    return project_curvature(rng.standard_normal((n, n, n, n)))


def constant_curvature_tensor(n: int, kappa: float = 1.0) -> np.ndarray:
    """``kappa (d_ac d_bd - d_ad d_bc)``, sectional curvature ``kappa``."""
    d = np.eye(n)
    return kappa * (np.einsum("ac,bd->abcd", d, d) - np.einsum("ad,bc->abcd", d, d))
