"""Closed-form asymptotically flat metrics on R^n and their curvature.

Metrics are conformally flat, ``g_ij = u^(4/(n-2)) delta_ij``, with

    u(x) = 1 + m / (2 r^(n-2)) + beta(x),

where ``beta`` is the Newtonian potential of a smooth compactly supported
non-negative density (so that ``Delta beta <= 0`` and the scalar curvature is
non-negative and compactly supported). Derivatives of ``g`` come from exact
second-order jets; all curvature quantities are computed by the generic
Levi-Civita formulas and never use the conformal structure.

Index conventions: ``R[a, b, c, d] = g(e_a, R(e_c, e_d) e_b)`` with
``R(X, Y) = [nabla_X, nabla_Y] - nabla_[X, Y]``, so ``R[a, b, a, b]`` is the
sectional curvature, ``Ric[a, b] = sum_c R[c, a, c, b]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, gamma, pi

import numpy as np

from .jets import Jet, polyval, where

__all__ = [
    "Bump",
    "MetricField",
    "flat_metric",
    "conformal_metric",
    "CurvaturePoint",
    "FramePoint",
    "DecayReport",
    "curvature_at",
    "frame_at",
    "riemann_grad_norm_at",
    "check_asymptotic_flatness",
    "isoperimetric_constant",
    "euclidean_isoperimetric_constant",
    "unit_ball_volume",
    "unit_sphere_area",
    "conformal_scalar_curvature",
    "scalar_curvature_l1",
    "metric_derivatives",
    "christoffel",
    "frame_and_connection",
    "riemann_frame",
    "riemann_gradient_frame",
    "CoreRegionError",
]

FLAT = "flat"
CONFORMAL = "conformal"


class CoreRegionError(ValueError):
    """Raised when a point lies inside the excluded core ball."""


def unit_ball_volume(n: int) -> float:
    return pi ** (n / 2) / gamma(n / 2 + 1)


def unit_sphere_area(n: int) -> float:
    """Area of the unit sphere S^(n-1) in R^n."""
    return n * unit_ball_volume(n)


def euclidean_isoperimetric_constant(n: int) -> float:
    """``A / V^((n-1)/n)`` for a round ball, ``n * omega_n^(1/n)``."""
    return n * unit_ball_volume(n) ** (1.0 / n)


@dataclass(frozen=True)
class Bump:
    """Smooth positive matter lump added to the conformal factor.

    The density is ``amplitude * (1 - s^2/width^2)^power`` for ``s < width``
    (``s`` the distance to ``center``) and the conformal factor receives its
    Newtonian potential, which is a polynomial in ``s^2`` inside the support
    and ``q / s^(n-2)`` outside.
    """

    amplitude: float
    center: tuple
    width: float = 1.0
    power: int = 4

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("bump amplitude must be non-negative")
        if self.width <= 0:
            raise ValueError("bump width must be positive")

    def _coeffs(self, n: int):
        k, w, A = self.power, self.width, self.amplitude
        c = [comb(k, j) * (-1) ** j / w ** (2 * j) for j in range(k + 1)]
        # F(w) = int_0^w t^(n-1) (1 - t^2/w^2)^k dt
        Fw = sum(c[j] * w ** (n + 2 * j) / (n + 2 * j) for j in range(k + 1))
        phi_w = A * Fw / ((n - 2) * w ** (n - 2))
        inner = [phi_w + A * sum(c[j] * w ** (2 + 2 * j) / ((n + 2 * j) * (2 + 2 * j)) for j in range(k + 1))]
        inner += [-A * c[j] / ((n + 2 * j) * (2 + 2 * j)) for j in range(k + 1)]
        return inner, A * Fw / (n - 2)

    def far_field_coefficient(self, n: int) -> float:
        """Coefficient q of the exterior potential ``q / s^(n-2)``."""
        return self._coeffs(n)[1]

    def potential(self, x: np.ndarray, n: int) -> Jet:
        xs = Jet.variables(x)
        c = np.asarray(self.center, dtype=float)
        if c.shape != (n,):
            raise ValueError("bump center has wrong dimension")
        s2 = (xs[0] - c[0]) * (xs[0] - c[0])
        for i in range(1, n):
            s2 = s2 + (xs[i] - c[i]) * (xs[i] - c[i])
        inner_coeffs, q = self._coeffs(n)
        inside = s2.val < self.width**2
        # Keep both branches finite before selecting.
        s2_out = Jet(np.where(inside, self.width**2, s2.val), s2.grad, s2.hess)
        outer = q * s2_out ** (-(n - 2) / 2.0)
        inner = polyval(inner_coeffs, s2)
        return where(inside, inner, outer)

    def density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s2 = np.sum((x - np.asarray(self.center)) ** 2, axis=-1) / self.width**2
        return self.amplitude * np.clip(1.0 - s2, 0.0, None) ** self.power


@dataclass(frozen=True)
class MetricField:
    """Asymptotically flat metric on R^n in the identity chart.

    Attributes:
        n: dimension.
        family: ``"flat"`` or ``"conformal"``.
        m_param: mass-like parameter of the conformal factor.
        bump: optional matter lump (positive scalar curvature source).
        k_override: isoperimetric constant to use instead of the Euclidean one.
        core_radius: radius of the excluded ball around the origin; defaults
            to ``m_param^(1/(n-2))`` for conformal metrics with ``m_param > 0``.
    """

    n: int
    family: str = FLAT
    m_param: float = 0.0
    bump: Bump | None = None
    k_override: float | None = None
    core_radius: float | None = None

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("dimension must be at least 3")
        if self.family not in (FLAT, CONFORMAL):
            raise ValueError(f"unknown metric family {self.family!r}")
        if self.m_param < 0:
            raise ValueError("m_param must be non-negative")
        if self.family == FLAT and (self.m_param != 0 or self.bump is not None):
            raise ValueError("flat metric takes no mass or bump")
        if self.k_override is not None and self.k_override <= 0:
            raise ValueError("isoperimetric override must be positive")

    @property
    def exponent(self) -> float:
        """Power p in ``g = u^p delta``."""
        return 4.0 / (self.n - 2)

    @property
    def r_core(self) -> float:
        if self.core_radius is not None:
            return float(self.core_radius)
        if self.family == CONFORMAL and self.m_param > 0:
            return self.m_param ** (1.0 / (self.n - 2))
        return 0.0

    @property
    def total_mass(self) -> float:
        """Mass of the conformal factor's r^(2-n) tail (with the c(n) that
        normalizes the unperturbed family to ``m_param``)."""
        m = self.m_param
        if self.bump is not None:
            m += 2.0 * self.bump.far_field_coefficient(self.n)
        return m

    def conformal_factor(self, x: np.ndarray) -> Jet:
        x = np.asarray(x, dtype=float)
        xs = Jet.variables(x)
        u = Jet.constant(1.0, xs[0])
        if self.family == FLAT:
            return u
        if self.m_param > 0:
            r2 = xs[0] * xs[0]
            for i in range(1, self.n):
                r2 = r2 + xs[i] * xs[i]
            u = u + (0.5 * self.m_param) * r2 ** (-(self.n - 2) / 2.0)
        if self.bump is not None:
            u = u + self.bump.potential(x, self.n)
        return u

    def check_points(self, x: np.ndarray) -> None:
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        if self.r_core > 0 and np.any(r < self.r_core * (1 - 1e-12)):
            raise CoreRegionError(f"point inside excluded core r < {self.r_core}")


def flat_metric(n: int, **kw) -> MetricField:
    return MetricField(n=n, family=FLAT, **kw)


def conformal_metric(n: int, m: float, bump: Bump | None = None, **kw) -> MetricField:
    return MetricField(n=n, family=CONFORMAL, m_param=m, bump=bump, **kw)


# ---------------------------------------------------------------------------
# pointwise tensor calculus (vectorized over leading axes)


def metric_derivatives(metric: MetricField, x: np.ndarray):
    """Return ``g_ij``, ``dg[k, i, j] = d_k g_ij`` and ``ddg[k, l, i, j]``."""
    x = np.asarray(x, dtype=float)
    n = metric.n
    eye = np.eye(n)
    if metric.family == FLAT:
        shp = x.shape[:-1]
        return (
            np.broadcast_to(eye, shp + (n, n)).copy(),
            np.zeros(shp + (n, n, n)),
            np.zeros(shp + (n, n, n, n)),
        )
    U = metric.conformal_factor(x) ** metric.exponent
    g = U.val[..., None, None] * eye
    dg = U.grad[..., :, None, None] * eye
    ddg = U.hess[..., :, :, None, None] * eye
    return g, dg, ddg


def christoffel(g, dg, ddg):
    """Christoffel symbols ``G[k, i, j]`` and derivatives ``dG[l, k, i, j]``."""
    ginv = np.linalg.inv(g)
    # lowered: L[a, i, j] = 1/2 (d_i g_ja + d_j g_ia - d_a g_ij)
    L = 0.5 * (
        np.einsum("...ija->...aij", dg)
        + np.einsum("...jia->...aij", dg)
        - dg
    )
    dL = 0.5 * (
        np.einsum("...lija->...laij", ddg)
        + np.einsum("...ljia->...laij", ddg)
        - ddg
    )
    G = np.einsum("...ka,...aij->...kij", ginv, L)
    dginv = -np.einsum("...kb,...lbc,...ca->...lka", ginv, dg, ginv, optimize=True)
    dG = np.einsum("...lka,...aij->...lkij", dginv, L) + np.einsum("...ka,...laij->...lkij", ginv, dL)
    return G, dG


def riemann_coordinate(g, G, dG):
    """Lowered coordinate Riemann tensor ``R_{rho sigma mu nu}``."""
    # R^r_{s m n} = d_m G^r_{n s} - d_n G^r_{m s} + G^r_{m l} G^l_{n s} - G^r_{n l} G^l_{m s}
    t1 = np.einsum("...mrns->...rsmn", dG)
    quad = np.einsum("...rml,...lns->...rsmn", G, G)
    Rup = t1 - np.swapaxes(t1, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    return np.einsum("...rl,...lsmn->...rsmn", g, Rup)


def _inv_sqrt_and_derivative(g, dg):
    lam, Q = np.linalg.eigh(g)
    s = lam ** -0.5
    S = np.einsum("...ia,...a,...ja->...ij", Q, s, Q, optimize=True)
    ginv = np.einsum("...ia,...a,...ja->...ij", Q, 1.0 / lam, Q, optimize=True)
    dginv = -np.einsum("...ia,...kab,...bj->...kij", ginv, dg, ginv, optimize=True)
    # Sylvester: dS S + S dS = d(g^-1), solved in the eigenbasis.
    B = np.einsum("...ia,...kij,...jb->...kab", Q, dginv, Q, optimize=True)
    denom = s[..., :, None] + s[..., None, :]
    dS = np.einsum("...ia,...kab,...jb->...kij", Q, B / denom[..., None, :, :], Q, optimize=True)
    return S, dS


def frame_and_connection(g, dg, G):
    """Orthonormal frame, connection one-forms and frame divergences.

    Returns ``e[i, a]`` (component i of e_a), ``de[k, i, a]``,
    ``omega[a, b, c] = g(nabla_{e_a} e_b, e_c)`` and ``div_e[a]``.
    """
    e, de = _inv_sqrt_and_derivative(g, dg)
    # (nabla_{e_a} e_b)^k = e_a^j (d_j e_b^k + G^k_{jm} e_b^m)
    cov = np.einsum("...ja,...jkb->...abk", e, de) + np.einsum("...ja,...kjm,...mb->...abk", e, G, e)
    omega = np.einsum("...abk,...kl,...lc->...abc", cov, g, e, optimize=True)
    div_e = np.einsum("...iia->...a", de) + np.einsum("...iij,...ja->...a", G, e)
    return e, de, omega, div_e


def riemann_frame(metric: MetricField, x: np.ndarray):
    """Frame Riemann components plus the frame data at points ``x``."""
    g, dg, ddg = metric_derivatives(metric, x)
    G, dG = christoffel(g, dg, ddg)
    Rc = riemann_coordinate(g, G, dG)
    e, de, omega, div_e = frame_and_connection(g, dg, G)
    R = np.einsum("...ijkl,...ia,...jb,...kc,...ld->...abcd", Rc, e, e, e, e, optimize=True)
    return R, G, e, omega, div_e


def riemann_gradient_frame(metric: MetricField, x: np.ndarray, rel_step: float = 1e-4):
    """Frame components ``nablaR[f, a, b, c, d] = (nabla_{e_f} R)(a, b, c, d)``.

    Frame components of R are central-differenced with step ``rel_step * r``
    and corrected by the connection one-forms. Also returns R itself.
    """
    x = np.asarray(x, dtype=float)
    n = metric.n
    R, _, e, omega, _ = riemann_frame(metric, x)
    r = np.linalg.norm(x, axis=-1)
    step = rel_step * np.maximum(r, 1.0)
    dR = np.empty(x.shape[:-1] + (n,) + R.shape[-4:])
    for i in range(n):
        dx = np.zeros_like(x)
        dx[..., i] = step
        Rp = riemann_frame(metric, x + dx)[0]
        Rm = riemann_frame(metric, x - dx)[0]
        dR[..., i, :, :, :, :] = (Rp - Rm) / (2.0 * step[..., None, None, None, None])
    nR = np.einsum("...if,...iabcd->...fabcd", e, dR)
    nR -= np.einsum("...fam,...mbcd->...fabcd", omega, R)
    nR -= np.einsum("...fbm,...amcd->...fabcd", omega, R)
    nR -= np.einsum("...fcm,...abmd->...fabcd", omega, R)
    nR -= np.einsum("...fdm,...abcm->...fabcd", omega, R)
    return nR, R


# ---------------------------------------------------------------------------
# public pointwise API


@dataclass
class CurvaturePoint:
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    riemann_norm_sq: np.ndarray
    riemann_grad_norm: np.ndarray | None = None


@dataclass
class FramePoint:
    frame: np.ndarray
    connection: np.ndarray
    div_frame: np.ndarray = field(default=None)


def curvature_at(metric: MetricField, x, with_gradient: bool = False) -> CurvaturePoint:
    """Curvature of ``metric`` at one point or a batch of points."""
    x = np.asarray(x, dtype=float)
    metric.check_points(x)
    R, G, *_ = riemann_frame(metric, x)
    ric = np.einsum("...cacb->...ab", R)
    tau = np.einsum("...aa->...", ric)
    out = CurvaturePoint(G, R, ric, tau, np.sum(R**2, axis=(-4, -3, -2, -1)))
    if with_gradient:
        out.riemann_grad_norm = riemann_grad_norm_at(metric, x)
    return out


def frame_at(metric: MetricField, x) -> FramePoint:
    x = np.asarray(x, dtype=float)
    metric.check_points(x)
    g, dg, _ = metric_derivatives(metric, x)
    G, _ = christoffel(g, dg, np.zeros(dg.shape[:-3] + (metric.n,) * 4))
    e, _, omega, div_e = frame_and_connection(g, dg, G)
    return FramePoint(e, omega, div_e)


def riemann_grad_norm_at(metric: MetricField, x) -> np.ndarray:
    """Frobenius norm of the covariant derivative of Riemann."""
    x = np.asarray(x, dtype=float)
    metric.check_points(x)
    nR, _ = riemann_gradient_frame(metric, x)
    return np.sqrt(np.sum(nR**2, axis=(-5, -4, -3, -2, -1)))


def conformal_scalar_curvature(metric: MetricField, x) -> np.ndarray:
    """Scalar curvature from ``-(4(n-1)/(n-2)) u^(-(n+2)/(n-2)) Delta u``."""
    n = metric.n
    u = metric.conformal_factor(np.asarray(x, dtype=float))
    return -(4.0 * (n - 1) / (n - 2)) * u.val ** (-(n + 2) / (n - 2)) * u.laplacian()


def isoperimetric_constant(metric: MetricField) -> float:
    if metric.k_override is not None:
        return float(metric.k_override)
    return euclidean_isoperimetric_constant(metric.n)


# ---------------------------------------------------------------------------
# asymptotics


def sphere_directions(n: int, count: int = 64, seed: int = 0) -> np.ndarray:
    """Deterministic sample of unit vectors (coordinate axes plus random)."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, n))
    v = np.vstack([np.eye(n), -np.eye(n), v])
    return v / np.linalg.norm(v, axis=1, keepdims=True)


@dataclass
class DecayReport:
    radii: list
    deviation: dict
    exponents: dict
    expected: dict
    passed: bool

    def to_dict(self):
        return {
            "radii": list(self.radii),
            "deviation": {k: list(v) for k, v in self.deviation.items()},
            "exponents": self.exponents,
            "expected": self.expected,
            "pass": self.passed,
        }


def check_asymptotic_flatness(metric: MetricField, radii, tol: float = 0.2) -> DecayReport:
    """Fit log-log decay slopes of ``g - delta``, ``dg`` and ``ddg``."""
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing")
    n = metric.n
    dirs = sphere_directions(n)
    dev = {"g": [], "dg": [], "ddg": []}
    for r in radii:
        g, dg, ddg = metric_derivatives(metric, r * dirs)
        dev["g"].append(float(np.abs(g - np.eye(n)).max()))
        dev["dg"].append(float(np.abs(dg).max()))
        dev["ddg"].append(float(np.abs(ddg).max()))
    expected = {"g": 2.0 - n, "dg": 1.0 - n, "ddg": -float(n)}
    exps = {}
    ok = True
    for key, vals in dev.items():
        vals = np.asarray(vals)
        if np.all(vals == 0):
            exps[key] = None
            continue
        if np.any(vals <= 0):
            exps[key] = float("nan")
            ok = False
            continue
        slope = float(np.polyfit(np.log(radii), np.log(vals), 1)[0])
        exps[key] = slope
        ok &= abs(slope - expected[key]) <= tol
    return DecayReport(list(radii), dev, exps, expected, bool(ok))


def scalar_curvature_l1(metric: MetricField, radii, n_radial: int = 96, n_theta: int = 48, n_phi: int = 64):
    """``int |tau| dmu`` over balls ``r_core < |x| < R`` for each R in radii (n = 3).

    Used to check that the scalar curvature is integrable: the sequence should
    saturate as R grows.
    """
    if metric.n != 3:
        raise NotImplementedError("shell quadrature implemented for n = 3")
    from .quadrature import sphere_quadrature

    dirs, wts = sphere_quadrature(3, n_theta, n_phi)
    out = []
    lo = max(metric.r_core, 1e-6)
    for R in radii:
        t, w = np.polynomial.legendre.leggauss(n_radial)
        r = lo + (R - lo) * (t + 1) / 2
        w = w * (R - lo) / 2
        pts = r[:, None, None] * dirs[None, :, :]
        tau = curvature_at(metric, pts.reshape(-1, 3)).scalar.reshape(len(r), len(dirs))
        g = metric_derivatives(metric, pts.reshape(-1, 3))[0]
        vol = np.sqrt(np.linalg.det(g)).reshape(len(r), len(dirs))
        out.append(float(np.einsum("r,d,rd->", w * r**2, wts, np.abs(tau) * vol, optimize=True)))
    return out
