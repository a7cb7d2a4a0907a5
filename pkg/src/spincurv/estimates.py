"""Second-derivative and curvature estimates for Dirac solutions.

The chain checked here is

    int_{M \\ D} eta |R|^2  <=  (64/N) sum_i int eta |nabla^2 psi^i|^2  <=  RHS,

where D is the set on which ``|1 - P_x|^2 >= N/32``, the middle step is the
pointwise bound ``(N - sqrt(8N) |1 - P|) |R|^2 <= 32 sum |nabla^2 psi^i|^2``,
and the last step integrates the divergence identity for
``Y = 1/2 grad |nabla psi|^2`` against a weight ``eta``. All constants on the
right are measured: the generic "dimensional constants" of the curvature
contractions are replaced by pointwise operator norms, and their worst ratios
against ``|R|`` or ``|nabla R|`` are recorded.

Laplacians of scalars use the sign ``Delta = div grad`` throughout.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .clifford import spinor_curvature
from .dirac import (
    bochner_laplacian,
    covariant_derivative,
    laplace_beltrami,
    pointwise_norm_sq,
    second_covariant_derivative,
)
from .geometry import MetricField, christoffel, metric_derivatives
from .grid import GridGeometry, central_diff
from .jets import Jet, where
from .mass import flux_integral, mass_normalization
from .spinor_op import SpinorBasis, SpinorOperatorField, exceptional_set, sobolev_exponent, spinor_operator_field

__all__ = [
    "EtaFunction",
    "eta_catalog",
    "divY_terms",
    "divY_residual",
    "ContractionConstants",
    "contraction_constants",
    "SecondDerivativeReport",
    "second_derivative_bound_report",
    "CurvatureBoundReport",
    "pointwise_curvature_bound",
    "algebraic_curvature_chain",
    "TheoremReport",
    "theorem1_report",
    "mass_scaling_trend",
    "integration_region",
    "DEFAULT_TOL_CONSTANT",
]

# discretization tolerance C in C h^2 for pointwise inequalities, in units of
# the local scale of the compared quantities
DEFAULT_TOL_CONSTANT = 1.0


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class EtaFunction:
    """Closed-form weight with exact derivatives.

    Kinds:
        ``cutoff``: ``exp(-(r/scale)^4)``, equal to 1 up to rounding near the
            origin and decaying fast beyond ``scale``.
        ``gaussian``: ``exp(-|x - c|^2 / (2 scale^2))``.
        ``bump``: ``exp(1 - 1/(1 - |x - c|^2/scale^2))`` inside the ball of
            radius ``scale`` and 0 outside (non-negative, compactly supported).
    """

    kind: str
    scale: float
    center: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("cutoff", "gaussian", "bump"):
            raise ValueError(f"unknown weight {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("weight scale must be positive")

    def jet(self, x: np.ndarray) -> Jet:
        x = np.asarray(x, dtype=float)
        c = np.zeros(x.shape[-1]) if self.center is None else np.asarray(self.center, dtype=float)
        xs = Jet.variables(x - c)
        r2 = xs[0] * xs[0]
        for v in xs[1:]:
            r2 = r2 + v * v
        t = r2 * (1.0 / self.scale**2)
        if self.kind == "cutoff":
            return (-(t * t)).exp()
        if self.kind == "gaussian":
            return (t * -0.5).exp()
        inside = t.val < 1.0
        # keep the expression finite outside, then select
        safe = Jet(np.where(inside, t.val, 0.0), t.grad, t.hess)
        val = (1.0 - 1.0 / (1.0 - safe)).exp()
        zero = Jet.constant(0.0, t)
        return where(inside, val, zero)

    def __call__(self, x) -> np.ndarray:
        return self.jet(x).val

    def riemannian(self, metric: MetricField, x: np.ndarray):
        """``(eta, d eta, |grad eta|_g, Delta_g eta)`` at points ``x``."""
        J = self.jet(x)
        g, dg, ddg = metric_derivatives(metric, x)
        G, _ = christoffel(g, dg, np.zeros(dg.shape[:-3] + (metric.n,) * 4))
        ginv = np.linalg.inv(g)
        gnorm = np.sqrt(np.einsum("...i,...ij,...j->...", J.grad, ginv, J.grad))
        lap = np.einsum("...ij,...ij->...", ginv, J.hess) - np.einsum("...ij,...kij,...k->...", ginv, G, J.grad)
        return J.val, J.grad, gnorm, lap


def eta_catalog(R_max: float) -> dict:
    """The three reference weights scaled to a domain of radius ``R_max``."""
    return {
        "cutoff": EtaFunction("cutoff", 0.5 * R_max),
        "gaussian": EtaFunction("gaussian", 0.25 * R_max),
        "bump": EtaFunction("bump", 0.75 * R_max),
    }


# ---------------------------------------------------------------------------
# divergence identity


def _curvature_at(geom: GridGeometry, mask: np.ndarray):
    curv = geom.point_curvature(mask, with_gradient=True)
    rep = geom.rep
    # frame tensor order is g(e_a, R(e_c, e_d) e_b); the spinor curvature
    # contraction needs the opposite sign (see commutator_curvature)
    RS = spinor_curvature(rep, -curv["riemann"])
    dRS = spinor_curvature(rep, -curv["grad_riemann"])  # (P, f, a, b, N, N)
    return curv, RS, dRS


def _re_inner(a, b):
    return np.real(np.sum(a.conj() * b, axis=-1))


def divY_terms(geom: GridGeometry, field: np.ndarray, mask: np.ndarray | None = None) -> dict:
    """Both sides of the pointwise identity for ``div Y``, at masked points.

    Keys: ``divY``, ``hess_sq`` (``|nabla^2 psi|^2``), ``lap_term``
    (``(nabla Delta^S psi, nabla psi)``), ``curv_RS``, ``curv_dRS``, ``curv_ric``
    (the three curvature sums) and ``grad_sq`` (``|nabla psi|^2``), plus the box
    field ``grad_sq_box`` for surface integrals.
    """
    grid = geom.grid
    if mask is None:
        mask = grid.interior(3)
    nab = covariant_derivative(field, geom)
    F = pointwise_norm_sq(nab, 1)
    divY = 0.5 * laplace_beltrami(F, geom)[mask]
    S2 = second_covariant_derivative(field, geom, nab)
    hess_sq = pointwise_norm_sq(S2, 2)[mask]
    del S2
    lap = bochner_laplacian(field, geom)
    nlap = covariant_derivative(lap, geom)
    del lap
    lap_term = np.sum(np.real(np.sum(nlap.conj() * nab, axis=-1)), axis=0)[mask]
    del nlap
    nab_m = np.moveaxis(nab[:, mask], 0, 1)  # (P, n, N)
    psi = field[mask]
    curv, RS, dRS = _curvature_at(geom, mask)
    # 2 (R^S(s_a, s_b) nabla_a psi, nabla_b psi)
    t1 = 2.0 * _re_inner(np.einsum("pabij,paj->pbi", RS, nab_m), nab_m).sum(axis=1)
    # ((nabla_a R^S)(s_a, s_b) psi, nabla_b psi)
    v = np.einsum("paabij,pj->pbi", dRS, psi)
    t2 = _re_inner(v, nab_m).sum(axis=1)
    # Ric(s_a, s_b) (nabla_a psi, nabla_b psi)
    gram = np.real(np.einsum("pai,pbi->pab", nab_m.conj(), nab_m))
    t3 = np.einsum("pab,pab->p", curv["ricci"], gram)
    return {
        "divY": divY,
        "hess_sq": hess_sq,
        "lap_term": lap_term,
        "curv_RS": t1,
        "curv_dRS": t2,
        "curv_ric": t3,
        "grad_sq": F[mask],
        "grad_sq_box": F,
    }


def divY_residual(geom: GridGeometry, field: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Volume-weighted L2 norm of ``div Y`` minus the right-hand side of the
    divergence identity (which holds for any smooth spinor field)."""
    if mask is None:
        mask = geom.grid.interior(3)
    T = divY_terms(geom, field, mask)
    rhs = -T["lap_term"] + T["hess_sq"] + T["curv_RS"] + T["curv_dRS"] + T["curv_ric"]
    w = geom.volume_weights[mask]
    return float(np.sqrt(np.sum(w * (T["divY"] - rhs) ** 2)))


# ---------------------------------------------------------------------------
# pointwise contraction constants


@dataclass
class ContractionConstants:
    """Worst pointwise ratios of the curvature contractions.

    ``c1 = sup |B_RS| / |R|`` with ``B_RS`` the quadratic form
    ``2 sum (R^S(s_a, s_b) u_a, u_b)``; ``c2 = sup |T| / |nabla R|`` for the map
    ``psi -> (sum_a (nabla_a R^S)(s_a, s_b) psi)_b``; ``c3 = sup |Ric| / |R|``;
    ``c4 = sup |grad tau| / (4 |nabla R|)`` and ``c5 = sup |tau| / (4 |R|)``.
    """

    c1: float
    c2: float
    c3: float
    c4: float
    c5: float

    @property
    def C1(self) -> float:
        return self.c1 + self.c3 + self.c5

    @property
    def C2(self) -> float:
        return self.c2 + self.c4

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(C1=self.C1, C2=self.C2)
        return d


def _safe_ratio(a, b, floor):
    ok = b > floor
    return float(np.max(a[ok] / b[ok])) if ok.any() else 0.0


def contraction_constants(geom: GridGeometry, mask: np.ndarray) -> ContractionConstants:
    curv, RS, dRS = _curvature_at(geom, mask)
    n, N = geom.grid.n, geom.N
    P = RS.shape[0]
    Rn = np.sqrt(curv["riemann_norm_sq"])
    dRn = curv["riemann_grad_norm"]
    # block (b, a) of the form matrix is R^S(s_a, s_b); symmetrize for Re<u, M u>
    M = 2.0 * np.transpose(RS, (0, 2, 4, 1, 3)).reshape(P, n * N, n * N)
    Mh = 0.5 * (M + np.conj(np.swapaxes(M, 1, 2)))
    K1 = np.abs(np.linalg.eigvalsh(Mh)).max(axis=1) if P else np.zeros(0)
    T = np.einsum("paabij->pbij", dRS).reshape(P, n * N, N)
    K2 = np.linalg.norm(T, ord=2, axis=(1, 2)) if P else np.zeros(0)
    K3 = np.abs(np.linalg.eigvalsh(curv["ricci"])).max(axis=1) if P else np.zeros(0)
    dtau = np.einsum("pfcaca->pf", curv["grad_riemann"])
    K4 = 0.25 * np.linalg.norm(dtau, axis=1)
    K5 = 0.25 * np.abs(curv["scalar"])
    floor_R = 1e-10 * max(float(Rn.max()) if P else 0.0, 1e-300)
    floor_dR = 1e-10 * max(float(dRn.max()) if P else 0.0, 1e-300)
    return ContractionConstants(
        _safe_ratio(K1, Rn, floor_R),
        _safe_ratio(K2, dRn, floor_dR),
        _safe_ratio(K3, Rn, floor_R),
        _safe_ratio(K4, dRn, floor_dR),
        _safe_ratio(K5, Rn, floor_R),
    )


# ---------------------------------------------------------------------------
# integrated second-derivative bound


@dataclass
class SecondDerivativeReport:
    """One Dirac solution against the integrated second-derivative bound.

    ``direct`` is ``int eta |nabla^2 psi|^2`` over the annulus
    ``r_inner <= |x| <= rho``; the ``*_term`` entries are the pieces of the
    integrated identity, whose sum reproduces ``direct`` up to
    ``balance_residual``. The inner sphere encloses a neighbourhood of the
    second asymptotic end (the origin), and its term tends to zero with the
    grid spacing. ``bound_measured`` uses the measured ``||nabla psi||^2``
    and ``sup |psi|``; ``bound_mass`` replaces them by ``c(n) m / 4`` and 1.
    """

    eta: str
    rho: float
    r_inner: float
    direct: float
    surface_term: float
    inner_surface_term: float
    laplacian_term: float
    dirac_term: float
    curvature_term: float
    balance_residual: float
    grad_energy: float
    sup_psi: float
    sup_lap_eta: float
    sup_eta_R: float
    eta_gradR_l2: float
    constants: dict
    bound_measured: float
    bound_mass: float
    C1_hat: float
    C2_hat: float
    mass: float

    @property
    def slack(self) -> float:
        """``bound_mass + |surfaces| - direct``; the surface terms vanish as the
        annulus exhausts the manifold."""
        return self.bound_mass + abs(self.surface_term) + abs(self.inner_surface_term) - self.direct

    @property
    def tolerance(self) -> float:
        return abs(self.balance_residual) + 1e-12

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tolerance

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(slack=self.slack, tolerance=self.tolerance, **{"pass": self.passed})
        return d


@dataclass
class _SpinorData:
    terms: dict
    grad_box: np.ndarray  # d_j |nabla psi|^2, shape (n,) + box


def _spinor_data(geom: GridGeometry, field: np.ndarray, mask: np.ndarray) -> _SpinorData:
    T = divY_terms(geom, field, mask)
    F = T.pop("grad_sq_box")
    h = geom.grid.h
    dF = np.stack([central_diff(F, i, h) for i in range(geom.grid.n)])
    T["F_box"] = F
    return _SpinorData(T, dF)


def _surface_term(geom: GridGeometry, data: _SpinorData, eta_box: np.ndarray, deta_box: np.ndarray, rho: float) -> float:
    """``int_{S_rho} (eta g(Y, nu) - 1/2 |nabla psi|^2 g(grad eta, nu)) dS``."""
    e = geom.frame
    ginv = np.einsum("...ia,...ja->...ij", e, e)
    F = data.terms["F_box"]
    vec = 0.5 * (eta_box[None] * data.grad_box - F[None] * np.moveaxis(deta_box, -1, 0))
    V = geom.sqrtg[None] * np.einsum("...ij,j...->i...", ginv, vec)
    return flux_integral(geom, None, rho, _density=V)


class _EtaBox:
    """Weight values on the whole box and on a mask (analytic derivatives)."""

    def __init__(self, geom: GridGeometry, eta: EtaFunction):
        grid = geom.grid
        pts = grid.points.reshape(-1, grid.n)
        J = eta.jet(pts)
        self.val = J.val.reshape(grid.shape)
        self.grad = J.grad.reshape(grid.shape + (grid.n,))
        self.eta = eta
        self.geom = geom

    def on(self, mask):
        x = self.geom.grid.points[mask]
        return self.eta.riemannian(self.geom.metric, x)


def integration_region(geom: GridGeometry, rho: float | None = None):
    """Outer radius, inner radius and the annular integration region.

    The inner sphere sits just outside the cube of points whose three-deep
    stencils reach the excluded core, so both boundary spheres see valid data.
    """
    grid = geom.grid
    if rho is None:
        rho = grid.R_max - 4 * grid.h
    r_in = max(grid.r_core, 0.0) + (3.0 * np.sqrt(grid.n) + 0.5) * grid.h
    if not r_in < rho:
        raise ValueError("grid too coarse for the integration annulus")
    return rho, r_in, grid.interior(3) & (grid.radius <= rho) & (grid.radius >= r_in)


def second_derivative_bound_report(geom: GridGeometry, basis: SpinorBasis, eta: EtaFunction,
                                   rho: float | None = None, mass: float | None = None,
                                   c_n: float | None = None, _cache: dict | None = None) -> list:
    """Per-spinor reports of the integrated second-derivative bound on ``D_rho``."""
    grid = geom.grid
    n = grid.n
    rho, r_in, region = integration_region(geom, rho)
    cache = {} if _cache is None else _cache
    if "spinors" not in cache:
        cache["spinors"] = [_spinor_data(geom, f, region) for f in basis.fields]
        cache["constants"] = contraction_constants(geom, region)
    consts = cache["constants"]
    m = geom.metric.total_mass if mass is None else float(mass)
    c = mass_normalization(n) if c_n is None else float(c_n)
    curv = geom.point_curvature(region, with_gradient=True)
    Rn = np.sqrt(curv["riemann_norm_sq"])
    dRn = curv["riemann_grad_norm"]
    eb = _EtaBox(geom, eta)
    ev, _, _, lap_eta = eb.on(region)
    w = geom.volume_weights[region]
    sup_lap = float(np.abs(lap_eta).max()) if lap_eta.size else 0.0
    sup_eR = float(np.abs(ev * Rn).max()) if Rn.size else 0.0
    eta_dR = float(np.sqrt(np.sum(w * (ev * dRn) ** 2)))
    C1h = 0.25 * c * (0.5 + consts.C1)
    C2h = np.sqrt(0.25 * c) * consts.C2
    out = []
    for sol, data in zip(basis.solutions, cache["spinors"]):
        T = data.terms
        direct = float(np.sum(w * ev * T["hess_sq"]))
        surf = _surface_term(geom, data, eb.val, eb.grad, rho)
        # the inner sphere bounds the region from the other end; its normal points inwards
        surf_in = -_surface_term(geom, data, eb.val, eb.grad, r_in)
        lap_t = 0.5 * float(np.sum(w * T["grad_sq"] * lap_eta))
        dir_t = float(np.sum(w * ev * T["lap_term"]))
        curv_t = -float(np.sum(w * ev * (T["curv_RS"] + T["curv_dRS"] + T["curv_ric"])))
        balance = direct - (surf + surf_in + lap_t + dir_t + curv_t)
        E = float(np.sum(w * T["grad_sq"]))
        sup_psi = sol.sup_norm
        measured = 0.5 * sup_lap * E + consts.C1 * E * sup_eR + consts.C2 * eta_dR * np.sqrt(E) * sup_psi
        bound = m * C1h * float(np.max(np.abs(ev * Rn) + np.abs(lap_eta))) + np.sqrt(max(m, 0.0)) * C2h * eta_dR
        out.append(SecondDerivativeReport(
            eta.kind, float(rho), float(r_in), direct, surf, surf_in, lap_t, dir_t, curv_t, balance, E, sup_psi, sup_lap, sup_eR,
            eta_dR, consts.to_dict(), float(measured), float(bound), float(C1h), float(C2h), m,
        ))
    return out


# ---------------------------------------------------------------------------
# pointwise curvature bound


def algebraic_curvature_chain(rep, R: np.ndarray, Psi: np.ndarray) -> dict:
    """Exact algebra behind the pointwise curvature bound at one or more points.

    ``R`` has trailing shape (n, n, n, n), ``Psi[..., k, i]`` is component k of
    spinor i. Returns ``expectation = -sum_i sum_ab <psi^i, R^S(a,b)^2 psi^i>``,
    its lower bound ``N/8 |R|^2 - |S|_HS |1 - P|_HS`` and the weaker closed form
    ``(N/8 - sqrt(N/8) |1 - P|) |R|^2``.
    """
    RS = spinor_curvature(rep, -np.asarray(R, dtype=float))
    S = np.einsum("...abij,...abjk->...ik", RS, RS)
    N = rep.N
    P = np.einsum("...ki,...li->...kl", Psi, Psi.conj())
    expect = -np.real(np.einsum("...ki,...kl,...li->...", Psi.conj(), S, Psi))
    trace = -np.real(np.trace(S, axis1=-2, axis2=-1))
    hsS = np.linalg.norm(S, axis=(-2, -1))
    dev = np.linalg.norm(np.eye(N) - P, axis=(-2, -1))
    r2 = np.sum(np.asarray(R, dtype=float) ** 2, axis=(-4, -3, -2, -1))
    return {
        "expectation": expect,
        "trace": trace,
        "trace_formula": N / 8.0 * r2,
        "lower_bound": trace - hsS * dev,
        "closed_form": (N / 8.0 - np.sqrt(N / 8.0) * dev) * r2,
        "hs_norm": hsS,
        "hs_bound": np.sqrt(N / 8.0) * r2,
        "one_minus_P": dev,
    }


@dataclass
class CurvatureBoundReport:
    """Pointwise check of ``(N - sqrt(8N) |1 - P|) |R|^2 <= 32 sum |nabla^2 psi^i|^2``.

    ``tolerance`` per point is ``C h^2 (|R|^2 + sum |nabla^2 psi^i|^2)``.
    ``commutator_violation`` checks ``sum |R^S psi|^2 <= 4 |nabla^2 psi|^2`` for
    each spinor (squared right side), ``expectation_violation`` the trace
    lower bound, which is exact algebra.
    """

    points: int
    h: float
    tol_constant: float
    max_violation: float
    violations: int
    min_slack: float
    commutator_violations: int
    commutator_max_excess: float
    expectation_violation: float
    trace_identity_residual: float
    hs_bound_excess: float
    slack: np.ndarray = field(repr=False, default=None)
    coords: np.ndarray = field(repr=False, default=None)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.commutator_violations == 0 and self.expectation_violation <= 1e-10

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("slack", "coords")}
        d["pass"] = self.passed
        return d


def pointwise_curvature_bound(geom: GridGeometry, basis: SpinorBasis, op_field: SpinorOperatorField | None = None,
                              mask: np.ndarray | None = None, tol_constant: float = DEFAULT_TOL_CONSTANT,
                              _hess: list | None = None) -> CurvatureBoundReport:
    grid = geom.grid
    if mask is None:
        mask = grid.interior(2)
    N = geom.N
    op = op_field or spinor_operator_field(basis)
    curv = geom.point_curvature(mask)
    R = curv["riemann"]
    r2 = curv["riemann_norm_sq"]
    RS = spinor_curvature(geom.rep, -R)
    if _hess is None:
        _hess = [pointwise_norm_sq(second_covariant_derivative(f, geom), 2)[mask] for f in basis.fields]
    hsum = np.sum(_hess, axis=0)
    Psi = basis.columns()[mask]
    chain = algebraic_curvature_chain(geom.rep, R, Psi)
    dev = np.sqrt(op.h_box[mask])
    lhs = (N - np.sqrt(8.0 * N) * dev) * r2
    rhs = 32.0 * hsum
    tol = tol_constant * grid.h**2 * (r2 + hsum)
    slack = rhs - lhs
    bad = slack < -tol
    # per spinor: sum_ab |R^S(a,b) psi|^2 <= 4 |nabla^2 psi|^2
    cviol, cexcess = 0, 0.0
    for i, hs in enumerate(_hess):
        v = np.einsum("pabij,pj->pabi", RS, Psi[..., i])
        lhs_i = pointwise_norm_sq(v.reshape(len(v), -1, N).transpose(1, 0, 2), 1)
        exc = lhs_i - 4.0 * hs - tol_constant * grid.h**2 * (lhs_i + hs)
        cviol += int(np.sum(exc > 0))
        cexcess = max(cexcess, float(exc.max()) if exc.size else 0.0)
    scale = np.maximum(r2, 1e-300)
    ev = float(np.max((chain["lower_bound"] - chain["expectation"]) / scale)) if r2.size else 0.0
    tr = float(np.max(np.abs(chain["trace"] - chain["trace_formula"]) / scale)) if r2.size else 0.0
    hb = float(np.max((chain["hs_norm"] - chain["hs_bound"]) / scale)) if r2.size else 0.0
    return CurvatureBoundReport(
        int(mask.sum()), grid.h, tol_constant,
        float(np.max(-slack - tol)) if slack.size else 0.0, int(bad.sum()),
        float(slack.min()) if slack.size else 0.0, cviol, cexcess, max(ev, 0.0), tr, hb,
        slack, grid.points[mask],
    )


# ---------------------------------------------------------------------------
# assembled report


@dataclass
class TheoremReport:
    eta: str
    eps: float
    measure_D: float
    measure_bound: float
    c3: float
    k: float
    mass: float
    lhs: float
    lhs_outside_region: float
    middle: float
    rhs: float
    rhs_measured: float
    slack_lower: float
    slack_upper: float
    tol_lower: float
    tol_upper: float
    surface_terms: list
    per_spinor: list
    curvature_bound: dict
    exceptional: dict

    @property
    def passed(self) -> bool:
        return (
            self.slack_lower >= -self.tol_lower
            and self.slack_upper >= -self.tol_upper
            and self.measure_D <= self.measure_bound
        )

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(ratio=self.ratio, **{"pass": self.passed})
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def theorem1_report(geom: GridGeometry, basis: SpinorBasis, eta: EtaFunction, op_field: SpinorOperatorField | None = None,
                    mass: float | None = None, c_n: float | None = None, rho: float | None = None,
                    tol_constant: float = DEFAULT_TOL_CONSTANT, _cache: dict | None = None) -> TheoremReport:
    """Assemble the full chain for one weight.

    ``_cache`` may be shared between calls with different weights on the same
    basis; it holds all weight-independent pointwise data.
    """
    grid = geom.grid
    n, N = grid.n, geom.N
    cache = {} if _cache is None else _cache
    op = op_field or cache.get("op") or spinor_operator_field(basis)
    cache["op"] = op
    eps = N / 32.0
    m = geom.metric.total_mass if mass is None else float(mass)
    c = mass_normalization(n) if c_n is None else float(c_n)
    if "exc" not in cache:
        cache["exc"] = exceptional_set(op, eps, basis=basis, mass=m, c_n=c)
    exc = cache["exc"]
    rho, _, region = integration_region(geom, rho)
    per = second_derivative_bound_report(geom, basis, eta, rho=rho, mass=m, c_n=c, _cache=cache)
    if "cbound" not in cache:
        hess = [pointwise_norm_sq(second_covariant_derivative(f, geom), 2)[region] for f in basis.fields]
        cache["cbound"] = (pointwise_curvature_bound(geom, basis, op, mask=region, tol_constant=tol_constant, _hess=hess), hess)
    cb, hess = cache["cbound"]
    outside_D = ~exc.mask
    w_all = geom.volume_weights
    # left side on the region and on the remaining active points
    sel = region & outside_D
    curv_sel = geom.point_curvature(sel)
    lhs = float(np.sum(w_all[sel] * eta(grid.points[sel]) * curv_sel["riemann_norm_sq"]))
    rest = grid.active & outside_D & ~region
    lhs_out = 0.0
    if rest.any():
        lhs_out = float(np.sum(w_all[rest] * eta(grid.points[rest]) * geom.point_curvature(rest)["riemann_norm_sq"]))
    ev = eta(grid.points[region])
    w = w_all[region]
    middle = 64.0 / N * float(sum(np.sum(w * ev * hs) for hs in hess))
    surf = [abs(p.surface_term) + abs(p.inner_surface_term) for p in per]
    rhs = 64.0 / N * sum(p.bound_mass + s for p, s in zip(per, surf))
    rhs_meas = 64.0 / N * sum(p.bound_measured + s for p, s in zip(per, surf))
    # lower step: the pointwise tolerance integrated over the region outside D
    r2 = geom.point_curvature(region)["riemann_norm_sq"]
    hsum = np.sum(hess, axis=0)
    out_r = outside_D[region]
    tol_lower = 64.0 / N * tol_constant * grid.h**2 * float(np.sum((w * ev * (r2 + hsum))[out_r])) + 1e-12
    tol_upper = 64.0 / N * sum(p.tolerance for p in per)
    q = sobolev_exponent(n)
    c3 = q**2 * 16.0 * n**2 * N**2 * c / eps**2
    return TheoremReport(
        eta=eta.kind, eps=eps, measure_D=exc.measure, measure_bound=exc.sobolev_bound_assembled, c3=c3, k=exc.k,
        mass=m, lhs=lhs, lhs_outside_region=lhs_out, middle=middle, rhs=float(rhs), rhs_measured=float(rhs_meas),
        slack_lower=middle - lhs, slack_upper=float(rhs) - middle, tol_lower=tol_lower, tol_upper=float(tol_upper),
        surface_terms=[[p.surface_term, p.inner_surface_term] for p in per], per_spinor=[p.to_dict() for p in per],
        curvature_bound=cb.to_dict(), exceptional=exc.to_dict(),
    )


def mass_scaling_trend(reports: dict) -> dict:
    """``{m: LHS/RHS}`` and whether the ratio is non-increasing as m decreases
    (a recorded trend, not an assertion)."""
    ms = sorted(reports)
    ratios = {float(k): reports[k].ratio for k in ms}
    vals = [ratios[float(k)] for k in ms]
    return {"ratios": ratios, "non_increasing_as_m_decreases": bool(all(a <= b * (1 + 1e-9) for a, b in zip(vals, vals[1:])))}
