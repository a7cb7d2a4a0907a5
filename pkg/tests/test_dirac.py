import numpy as np
import pytest

from spincurv.dirac import (
    NegativeScalarCurvatureError,
    SolverError,
    apply_dirac,
    bochner_laplacian,
    commutator_residual,
    covariant_derivative,
    formal_adjoint_defect,
    laplace_beltrami,
    solve_boundary_problem,
    weitzenbock_residual,
)
from spincurv.geometry import Bump, conformal_metric, flat_metric
from spincurv.grid import Grid, GridGeometry
from spincurv.studies import gaussian_spinor

PSI0 = np.array([0.6, 0.8j])


def _geom(metric, h, R=4.0, rc=0.5):
    return GridGeometry(metric, Grid(metric.n, h, rc if metric.family != "flat" else 0.0, R))


def test_flat_solution_is_constant(small_flat):
    sol = solve_boundary_problem(small_flat, PSI0)
    act = small_flat.grid.active
    assert np.abs(sol.field[act] - PSI0).max() < 1e-14
    assert sol.iterations == 0
    assert sol.sup_norm == pytest.approx(1.0)


def test_constant_spinor_is_parallel_on_flat(small_flat):
    f = np.broadcast_to(PSI0, small_flat.grid.shape + (2,)).copy()
    nab = covariant_derivative(f, small_flat)
    assert np.abs(nab[:, small_flat.grid.interior(1)]).max() == 0


def test_conformal_solve_converges(small_conformal):
    sol = solve_boundary_problem(small_conformal, PSI0)
    assert sol.residual <= 1e-8
    assert sol.sup_norm <= 1 + 1e-6
    # the solution dips below |psi0| = 1 towards the core
    assert np.sqrt(sol._active_norm_sq.min()) < 0.9


def test_solver_failure_is_reported(small_conformal):
    with pytest.raises(SolverError):
        solve_boundary_problem(small_conformal, PSI0, maxiter=2)


def test_negative_scalar_curvature_rejected():
    geom = _geom(conformal_metric(3, 1.0), 0.5)
    act = geom.grid.active

    def fake(mask, with_gradient=False):
        n = int(mask.sum())
        return {"scalar": -np.ones(n), "riemann_norm_sq": np.ones(n)}

    geom.point_curvature = fake
    with pytest.raises(NegativeScalarCurvatureError):
        solve_boundary_problem(geom, PSI0)
    assert act.any()


def test_laplace_beltrami_exact_on_quadratics(small_flat):
    x = small_flat.grid.points
    f = x[..., 0] ** 2 + 2 * x[..., 1] ** 2 - x[..., 0] * x[..., 2]
    lap = laplace_beltrami(f, small_flat)
    inner = small_flat.grid.interior(2)
    assert np.allclose(lap[inner], 6.0, atol=1e-10)


def test_dirac_squared_on_flat_is_laplacian(small_flat):
    x = small_flat.grid.points
    f = np.zeros(small_flat.grid.shape + (2,), dtype=complex)
    f[..., 0] = x[..., 0] ** 2
    f[..., 1] = 1j * x[..., 1] * x[..., 2]
    D2 = apply_dirac(apply_dirac(f, small_flat), small_flat)
    lap = bochner_laplacian(f, small_flat)
    inner = small_flat.grid.interior(2)
    # D^2 = -sum d_i^2 on flat space
    assert np.allclose(D2[inner][:, 0], -2.0, atol=1e-10)
    assert np.allclose(lap[inner], D2[inner], atol=1e-10)


def _ratio(metric, fn, hs=(0.5, 0.25)):
    vals = []
    for h in hs:
        geom = _geom(metric, h)
        f = gaussian_spinor(geom.grid.points, (2.0, 0.0, 0.0), 1.0)
        mask = geom.grid.interior(2) & (geom.grid.radius > 1.0)
        vals.append(fn(geom, f, mask))
    return vals[0] / vals[1]


@pytest.mark.parametrize("metric", [flat_metric(3), conformal_metric(3, 1.0, bump=Bump(0.3, (2.0, 0.5, 0.0), 1.0))],
                         ids=["flat", "conformal-bump"])
def test_weitzenbock_residual_second_order(metric):
    assert 3.0 < _ratio(metric, weitzenbock_residual) < 5.0


def test_commutator_curvature_second_order():
    # h = 0.5 is still preasymptotic for the commutator (ratio 2.99 from 0.5 to 0.25)
    metric = conformal_metric(3, 1.0)
    assert 3.0 < _ratio(metric, commutator_residual, hs=(0.25, 0.125)) < 5.0


def test_commutator_sign_matters():
    geom = _geom(conformal_metric(3, 1.0), 0.25)
    f = gaussian_spinor(geom.grid.points, (2.0, 0.0, 0.0), 1.0)
    mask = geom.grid.interior(2) & (geom.grid.radius > 1.0)
    good = commutator_residual(geom, f, mask)
    from spincurv import dirac

    orig = dirac.commutator_curvature
    try:
        dirac.commutator_curvature = lambda g, m: -orig(g, m)
        bad = commutator_residual(geom, f, mask)
    finally:
        dirac.commutator_curvature = orig
    assert bad > 5 * good


def test_dirac_formally_self_adjoint():
    geom = _geom(conformal_metric(3, 1.0), 0.25)
    x = geom.grid.points
    phi = gaussian_spinor(x, (2.0, 0.5, 0.0), 0.6)
    psi = gaussian_spinor(x, (2.2, 0.0, 0.3), 0.6)[..., ::-1].copy()
    defect = formal_adjoint_defect(geom, phi, psi)
    act = geom.grid.active
    scale = np.sum(geom.volume_weights[act] * np.abs(apply_dirac(phi, geom)[act]).sum(-1) * np.abs(psi[act]).sum(-1))
    # D is symmetric for the L2 product: <D phi, psi> = <phi, D psi> up to O(h^2)
    assert abs(defect) < 1e-2 * scale
