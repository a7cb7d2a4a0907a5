"""Orthonormal families of Dirac solutions and the spinor operator P_x.

For boundary data ``psi0^1..psi0^N`` forming an orthonormal basis the spinor
operator is ``P_x psi = sum_i <psi^i_x, psi> psi^i_x``. With the column matrix
``Psi = [psi^1 ... psi^N]`` this is ``Psi Psi^H``, and its non-zero spectrum
agrees with that of the Gram matrix ``H = Psi^H Psi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dirac import _check_scalar_curvature, assemble_dirac, solve_boundary_problem
from .grid import GridGeometry, central_diff
from .mass import mass_normalization
from .geometry import isoperimetric_constant

__all__ = [
    "SpinorBasis",
    "SpinorOperatorField",
    "ExceptionalSet",
    "build_spinor_basis",
    "spinor_operator_field",
    "exceptional_set",
    "gradient_norm_sq",
    "sobolev_exponent",
]


@dataclass
class SpinorBasis:
    geom: GridGeometry
    boundary_data: np.ndarray  # (N, N), row i is psi0^i
    solutions: list

    @property
    def fields(self) -> list:
        return [s.field for s in self.solutions]

    @property
    def N(self) -> int:
        return self.geom.N

    def columns(self) -> np.ndarray:
        """Box array ``Psi[..., k, i]`` = component k of psi^i."""
        return np.stack(self.fields, axis=-1)

    def outer_gram_deviation(self) -> float:
        """``max |H - I|`` on the innermost layer of outer Dirichlet points'
        active neighbours (the last active shell)."""
        g = self.geom.grid
        shell = g.active & (g.radius >= g.R_max - g.h)
        Psi = self.columns()[shell]
        H = np.einsum("pki,pkj->pij", Psi.conj(), Psi)
        return float(np.abs(H - np.eye(self.N)).max()) if len(H) else 0.0


def build_spinor_basis(geom: GridGeometry, tol: float = 1e-8, maxiter: int = 100_000,
                       tau_threshold: float = 1e-8, basis: np.ndarray | None = None) -> SpinorBasis:
    """Solve the boundary problem for each vector of an orthonormal basis.

    The sparse operator is assembled once and shared by the N solves; any
    solver failure propagates (all-or-nothing).
    """
    N = geom.N
    B = np.eye(N, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    if B.shape != (N, N) or not np.allclose(B.conj() @ B.T, np.eye(N), atol=1e-12):
        raise ValueError("boundary data must be an orthonormal basis of C^N")
    _check_scalar_curvature(geom, tau_threshold)
    system = assemble_dirac(geom)
    sols = [
        solve_boundary_problem(geom, B[i], tol=tol, maxiter=maxiter, system=system, check_curvature=False)
        for i in range(N)
    ]
    return SpinorBasis(geom, B, sols)


@dataclass
class SpinorOperatorField:
    """Per-point data on the active points (flattened in C order) plus the
    box field of ``h`` needed for gradients."""

    geom: GridGeometry
    P: np.ndarray
    H: np.ndarray
    h_values: np.ndarray
    op_norm: np.ndarray
    h_box: np.ndarray
    eig_min: np.ndarray
    eig_max: np.ndarray

    @property
    def max_op_norm(self) -> float:
        return float(self.op_norm.max()) if self.op_norm.size else 0.0

    def trace_formula_residual(self) -> float:
        """``max |h - (N - 2 tr H + |H|_HS^2)|`` with h from the HS definition."""
        N = self.P.shape[-1]
        alt = N - 2 * np.einsum("pii->p", self.H).real + np.sum(np.abs(self.H) ** 2, axis=(1, 2))
        return float(np.abs(self.h_values - alt).max()) if alt.size else 0.0

    def summary(self, bins: int = 16) -> dict:
        hist, edges = np.histogram(self.h_values, bins=bins)
        return {
            "max_op_norm": self.max_op_norm,
            "min_gram_eigenvalue": float(self.eig_min.min()) if self.eig_min.size else 0.0,
            "max_gram_eigenvalue": float(self.eig_max.max()) if self.eig_max.size else 0.0,
            "max_h": float(self.h_values.max()) if self.h_values.size else 0.0,
            "h_histogram": {"counts": hist.tolist(), "edges": edges.tolist()},
            "trace_formula_residual": self.trace_formula_residual(),
        }


def _h_from_columns(Psi: np.ndarray) -> np.ndarray:
    N = Psi.shape[-1]
    P = np.einsum("...ki,...li->...kl", Psi, Psi.conj())
    D = np.eye(N) - P
    return np.sum(np.abs(D) ** 2, axis=(-2, -1))


def spinor_operator_field(basis: SpinorBasis) -> SpinorOperatorField:
    geom = basis.geom
    grid = geom.grid
    Psi_box = basis.columns()
    Psi = Psi_box[grid.active]
    P = np.einsum("pki,pli->pkl", Psi, Psi.conj())
    H = np.einsum("pki,pkj->pij", Psi.conj(), Psi)
    evals = np.linalg.eigvalsh(H) if len(H) else np.zeros((0, basis.N))
    N = basis.N
    h_vals = np.sum(np.abs(np.eye(N) - P) ** 2, axis=(1, 2))
    h_box = _h_from_columns(Psi_box)
    return SpinorOperatorField(
        geom, P, H, h_vals, evals[:, -1] if len(evals) else evals.reshape(0),
        h_box, evals[:, 0] if len(evals) else evals.reshape(0), evals[:, -1] if len(evals) else evals.reshape(0),
    )


def gradient_norm_sq(scalar_box: np.ndarray, geom: GridGeometry) -> np.ndarray:
    """Pointwise ``|grad f|_g^2 = g^ij d_i f d_j f`` by central differences."""
    n, h = geom.grid.n, geom.grid.h
    d = np.stack([central_diff(scalar_box, i, h) for i in range(n)], axis=-1)
    # g^ij = sum_a e_a^i e_a^j, so |grad f|^2 = sum_a (e_a(f))^2
    ef = np.einsum("...ia,...i->...a", geom.frame, d)
    return np.sum(ef**2, axis=-1)


def sobolev_exponent(n: int) -> float:
    return 2.0 * n / (n - 2)


@dataclass
class ExceptionalSet:
    eps: float
    mask: np.ndarray
    measure: float
    grad_h_sq: float
    grad_bound: float
    sobolev_bound_measured: float
    sobolev_bound_assembled: float
    k: float
    q: float
    gradient_ratio_violation: float

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "cells": int(self.mask.sum()),
            "measure": self.measure,
            "grad_h_sq": self.grad_h_sq,
            "grad_bound": self.grad_bound,
            "sobolev_bound_measured": self.sobolev_bound_measured,
            "sobolev_bound_assembled": self.sobolev_bound_assembled,
            "k": self.k,
            "q": self.q,
            "pointwise_gradient_violation": self.gradient_ratio_violation,
            "measure_within_bound": self.measure <= self.sobolev_bound_measured,
            "gradient_within_bound": self.grad_h_sq <= self.grad_bound * 1.05,
        }


def exceptional_set(field: SpinorOperatorField, eps: float, basis: SpinorBasis | None = None,
                    mass: float | None = None, c_n: float | None = None) -> ExceptionalSet:
    """Cells with ``h >= eps``, their Riemannian measure and the bound chain.

    The Sobolev side is ``mu(D) <= ((q/k)^2 ||grad h||^2 / eps^2)^(n/(n-2))``,
    evaluated once with the measured gradient norm and once with the a-priori
    gradient bound ``16 n^2 N^2 c(n) m``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    geom = field.geom
    grid = geom.grid
    metric = geom.metric
    n, N = grid.n, geom.N
    mask = grid.active & (field.h_box >= eps)
    w = geom.volume_weights
    measure = float(np.sum(w[mask]))
    g2 = gradient_norm_sq(field.h_box, geom)
    act = grid.active & np.isfinite(g2)
    grad_h_sq = float(np.sum(w[act] * g2[act]))
    c = mass_normalization(n) if c_n is None else float(c_n)
    m = metric.total_mass if mass is None else float(mass)
    grad_bound = 16.0 * n**2 * N**2 * c * m
    q = sobolev_exponent(n)
    k = isoperimetric_constant(metric)
    expo = n / (n - 2.0)
    sob_meas = ((q / k) ** 2 * grad_h_sq / eps**2) ** expo
    sob_asm = ((q / k) ** 2 * grad_bound / eps**2) ** expo
    viol = 0.0
    if basis is not None:
        from .dirac import covariant_derivative, pointwise_norm_sq

        tot = np.zeros(grid.shape)
        for f in basis.fields:
            tot += np.sqrt(pointwise_norm_sq(covariant_derivative(f, geom), 1))
        inner = grid.interior(2)
        gap = np.sqrt(g2[inner]) - 8.0 * n * tot[inner]
        viol = float(max(gap.max(), 0.0)) if gap.size else 0.0
    return ExceptionalSet(eps, mask, measure, grad_h_sq, grad_bound, sob_meas, sob_asm, k, q, viol)
