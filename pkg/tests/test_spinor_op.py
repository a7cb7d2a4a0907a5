import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spincurv.spinor_op import build_spinor_basis, exceptional_set, spinor_operator_field


@pytest.fixture(scope="module")
def op(small_basis):
    return spinor_operator_field(small_basis)


def test_flat_operator_is_identity(small_flat):
    basis = build_spinor_basis(small_flat)
    f = spinor_operator_field(basis)
    assert np.abs(f.P - np.eye(2)).max() < 1e-14
    assert f.h_values.max() < 1e-14
    exc = exceptional_set(f, 1e-6)
    assert exc.measure == 0 and not exc.mask.any()


def test_basis_shape(small_basis):
    assert small_basis.N == 2 and len(small_basis.solutions) == 2
    assert small_basis.columns().shape[-2:] == (2, 2)


def test_non_orthonormal_data_rejected(small_conformal):
    with pytest.raises(ValueError):
        build_spinor_basis(small_conformal, basis=np.array([[1, 0], [1, 1]]))


def test_operator_bounds(op):
    assert op.max_op_norm <= 1 + 1e-6
    assert op.eig_min.min() >= -1e-9 and op.eig_max.max() <= 1 + 1e-6


def test_trace_identities(op, small_basis):
    assert op.trace_formula_residual() < 1e-10
    Psi = small_basis.columns()[small_basis.geom.grid.active]
    trP = np.einsum("pkk->p", op.P).real
    assert np.abs(trP - np.sum(np.abs(Psi) ** 2, axis=(1, 2))).max() < 1e-10


def test_gradient_of_h_bounded_pointwise(op, small_basis):
    exc = exceptional_set(op, 2 / 32, basis=small_basis)
    assert exc.gradient_ratio_violation == 0.0
    assert exc.grad_h_sq <= exc.grad_bound


def test_exceptional_set_shrinks_with_eps(op):
    a = exceptional_set(op, 0.01)
    b = exceptional_set(op, 0.1)
    assert b.measure <= a.measure
    assert np.all(b.mask <= a.mask)
    with pytest.raises(ValueError):
        exceptional_set(op, 0.0)


def test_outer_gram_close_to_identity(small_basis):
    # the data are imposed on the outer ring, so the Gram matrix is near 1 there
    assert small_basis.outer_gram_deviation() < 0.3


@settings(max_examples=50, deadline=None)
@given(idx=st.integers(0, 10**9), seed=st.integers(0, 2**31 - 1))
def test_projection_never_expands(op, idx, seed):
    p = idx % len(op.P)
    r = np.random.default_rng(seed)
    phi = r.standard_normal((100, 2)) + 1j * r.standard_normal((100, 2))
    out = phi @ op.P[p].T
    assert np.all(np.linalg.norm(out, axis=1) <= np.linalg.norm(phi, axis=1) * (1 + 1e-6))
