"""ADM mass, boundary flux and gradient energy of Dirac solutions."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .dirac import DiracSolution, covariant_derivative, pointwise_norm_sq, solve_boundary_problem
from .geometry import MetricField, metric_derivatives, unit_sphere_area
from .grid import GridGeometry
from .quadrature import default_orders, sphere_quadrature

__all__ = [
    "MassReport",
    "AdmMass",
    "mass_normalization",
    "adm_flux",
    "adm_mass",
    "richardson_limit",
    "gradient_energy",
    "flux_integral",
    "mass_inequality_report",
]


def mass_normalization(n: int) -> float:
    """``c(n) = 2 (n - 1) |S^(n-1)|``, the value for which ``u = 1 + m/(2r^(n-2))``
    has mass ``m``. Equals 16 pi for n = 3."""
    return 2.0 * (n - 1) * unit_sphere_area(n)


def adm_flux(metric: MetricField, rho: float, orders: tuple | None = None) -> float:
    """``int_{S_rho} (d_j g_ij - d_i g_jj) nu^i dA`` on the coordinate sphere."""
    n = metric.n
    metric.check_points(np.full((1, n), rho / np.sqrt(n)))
    dirs, wts = sphere_quadrature(n, *(orders or default_orders(n)))
    _, dg, _ = metric_derivatives(metric, rho * dirs)
    div = np.einsum("pjij->pi", dg)
    tr = np.einsum("pijj->pi", dg)
    integrand = np.einsum("pi,pi->p", div - tr, dirs)
    return float(np.dot(wts, integrand) * rho ** (n - 1))


def richardson_limit(x, y) -> tuple[float, list]:
    """Value at ``x = 0`` of the interpolating polynomial through ``(x, y)``.

    Also returns the sequence of limits using the first 1, 2, ... points
    (largest ``x`` first), which should settle monotonically.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(-x)
    x, y = x[order], y[order]
    seq = []
    for k in range(1, len(x) + 1):
        # Neville evaluation at 0
        p = list(y[:k])
        for lvl in range(1, k):
            for i in range(k - lvl):
                p[i] = (x[i] * p[i + 1] - x[i + lvl] * p[i]) / (x[i] - x[i + lvl])
        seq.append(float(p[0]))
    return seq[-1], seq


@dataclass
class AdmMass:
    radii: list
    values: list
    mass: float
    sequence: list
    monotone: bool
    c_n: float


def adm_mass(metric: MetricField, radii, c_n: float | None = None, orders: tuple | None = None) -> AdmMass:
    """Mass from the surface integral at several radii, extrapolated in ``1/rho``."""
    radii = [float(r) for r in radii]
    if len(radii) == 0 or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be non-empty and increasing")
    c = mass_normalization(metric.n) if c_n is None else float(c_n)
    vals = [adm_flux(metric, r, orders) / c for r in radii]
    lim, seq = richardson_limit([1.0 / r for r in radii], vals)
    # successive corrections should shrink
    steps = np.abs(np.diff(seq))
    eps = 1e-10 * max(1.0, max(abs(v) for v in seq))
    monotone = bool(np.all(np.diff(steps) <= eps))
    return AdmMass(radii, vals, lim, seq, monotone, c)


def gradient_energy(geom: GridGeometry, field: np.ndarray, mask: np.ndarray | None = None) -> float:
    """``||nabla psi||_2^2`` by the midpoint rule with Riemannian cell volumes."""
    if mask is None:
        mask = geom.grid.active
    nab = covariant_derivative(field, geom)
    dens = pointwise_norm_sq(nab, 1)
    return float(np.sum(geom.volume_weights[mask] * dens[mask]))


def _flux_density(geom: GridGeometry, field: np.ndarray) -> np.ndarray:
    """Coordinate vector ``sqrt(g) X^i`` with ``X = 1/2 grad |psi|^2``; shape (n,) + grid."""
    nab = covariant_derivative(field, geom)
    # e_a(|psi|^2) = 2 Re <psi, nabla_a psi>
    Fa = np.einsum("...j,a...j->a...", field.conj(), nab).real
    X = np.einsum("...ia,a...->i...", geom.frame, Fa)
    return geom.sqrtg[None] * X


def flux_integral(geom: GridGeometry, field: np.ndarray, rho: float, orders: tuple | None = None,
                  _density: np.ndarray | None = None) -> float:
    """``int_{S_rho} g(X, nu) dS`` with ``X = 1/2 grad |psi|^2``.

    Uses ``g(X, nu) dS_g = sqrt(g) X^i n_i dS_eucl`` for the coordinate sphere
    with Euclidean normal ``n``; the vector is interpolated trilinearly.
    """
    grid = geom.grid
    n, h = grid.n, grid.h
    if rho > grid.R_max - h or rho < grid.r_core + 2 * h:
        raise ValueError(f"radius {rho} too close to the grid boundary for interpolation")
    V = _flux_density(geom, field) if _density is None else _density
    dirs, wts = sphere_quadrature(n, *(orders or default_orders(n)))
    idx = (rho * dirs / h + grid.M).T
    vals = np.stack([map_coordinates(np.nan_to_num(V[i]), idx, order=1) for i in range(n)], axis=1)
    return float(np.dot(wts, np.einsum("pi,pi->p", vals, dirs)) * rho ** (n - 1))


@dataclass
class MassReport:
    mass: float
    c_n: float
    psi0_norm_sq: float
    flux_radii: list
    flux_values: list
    grad_energy: float
    slack: float
    truncation_tolerance: float
    mass_radii: list = field(default_factory=list)
    mass_values: list = field(default_factory=list)
    mass_monotone: bool = True
    sup_norm: float | None = None

    @property
    def passed(self) -> bool:
        return self.slack >= -self.truncation_tolerance

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def mass_inequality_report(geom: GridGeometry, psi0, solution: DiracSolution | None = None,
                           mass_radii=None, flux_fractions=(0.25, 0.5, 0.75), c_n: float | None = None) -> MassReport:
    """Compare ``c(n) |psi0|^2 m`` with ``4 ||nabla psi||^2`` for the Dirac solution.

    The slack tolerance is the outer truncation scale ``c(n)|psi0|^2 m * m / R^(n-2)``
    (the Dirichlet data differ from the true asymptotic value at that order).
    """
    metric = geom.metric
    grid = geom.grid
    n = metric.n
    psi0 = np.asarray(psi0, dtype=complex)
    sol = solution or solve_boundary_problem(geom, psi0)
    c = mass_normalization(n) if c_n is None else float(c_n)
    if mass_radii is None:
        mass_radii = [grid.R_max * f for f in (1, 2, 4, 8, 16)]
    if metric.family == "flat":
        am = AdmMass(list(mass_radii), [0.0] * len(mass_radii), 0.0, [0.0], True, c)
    else:
        am = adm_mass(metric, mass_radii, c_n=c)
    energy = gradient_energy(geom, sol.field)
    V = _flux_density(geom, sol.field)
    radii = [f * grid.R_max for f in flux_fractions]
    radii = [r for r in radii if grid.r_core + 2 * grid.h <= r <= grid.R_max - grid.h]
    fluxes = [flux_integral(geom, sol.field, r, _density=V) for r in radii]
    p2 = float(np.vdot(psi0, psi0).real)
    m = am.mass
    slack = c * p2 * m - 4.0 * energy
    tol = c * p2 * abs(m) * abs(m) / grid.R_max ** (n - 2) + 1e-9
    return MassReport(
        mass=m, c_n=c, psi0_norm_sq=p2, flux_radii=radii, flux_values=fluxes, grad_energy=energy,
        slack=slack, truncation_tolerance=tol, mass_radii=am.radii, mass_values=am.values,
        mass_monotone=am.monotone, sup_norm=sol.sup_norm,
    )
