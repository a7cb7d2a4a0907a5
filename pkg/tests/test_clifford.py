import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spincurv.clifford import (
    build_clifford_rep,
    clifford_mul,
    conjugated_rep,
    constant_curvature_tensor,
    curvature_action,
    random_curvature_tensor,
    riemann_symmetry_residual,
    spinor_curvature,
    spinor_curvature_square_stats,
)


@pytest.mark.parametrize("n,N", [(3, 2), (4, 4), (5, 4), (6, 8)])
def test_spinor_dimension(n, N):
    rep = build_clifford_rep(n)
    assert rep.N == N
    assert rep.gamma.shape == (n, N, N)


@pytest.mark.parametrize("n", [2, 7, 3.5])
def test_unsupported_dimension(n):
    with pytest.raises(ValueError):
        build_clifford_rep(n)


def test_gammas_read_only():
    rep = build_clifford_rep(3)
    with pytest.raises(ValueError):
        rep.gamma[0, 0, 0] = 1


def test_clifford_square_is_minus_norm(rng):
    rep = build_clifford_rep(4)
    v = rng.standard_normal(4)
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    vv = clifford_mul(rep, v, clifford_mul(rep, v, psi))
    assert np.allclose(vv, -np.dot(v, v) * psi, atol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_random_tensors_are_curvature_tensors(n, rng):
    R = random_curvature_tensor(n, rng)
    assert riemann_symmetry_residual(R) < 1e-12
    assert np.abs(R).max() > 0


def test_constant_curvature_trace_sum():
    # N/8 |R|^2 with |R|^2 = 2 n (n - 1) for unit sectional curvature
    st_ = spinor_curvature_square_stats(build_clifford_rep(3), constant_curvature_tensor(3))
    assert st_["riemann_norm_sq"] == pytest.approx(12.0)
    assert st_["trace_sum"] == pytest.approx(3.0, abs=1e-12)


def test_spinor_curvature_antihermitian(rng):
    rep = build_clifford_rep(5)
    RS = spinor_curvature(rep, random_curvature_tensor(5, rng))
    assert np.allclose(RS, -np.conj(np.swapaxes(RS, -1, -2)), atol=1e-12)
    assert np.allclose(RS, -np.swapaxes(RS, 0, 1), atol=1e-12)


def test_curvature_action_rejects_non_curvature(rng):
    rep = build_clifford_rep(3)
    T = rng.standard_normal((3, 3, 3, 3))
    with pytest.raises(ValueError):
        curvature_action(rep, T, 0, 1, np.ones(2))


def _unitary(seed, N):
    r = np.random.default_rng(seed)
    q, _ = np.linalg.qr(r.standard_normal((N, N)) + 1j * r.standard_normal((N, N)))
    return q


@settings(max_examples=40, deadline=None)
@given(n=st.sampled_from([3, 4, 5, 6]), seed=st.integers(0, 2**31 - 1))
def test_trace_identities_hold_for_any_tensor(n, seed):
    r = np.random.default_rng(seed)
    rep = build_clifford_rep(n)
    R = random_curvature_tensor(n, r) * math.exp(r.uniform(-3, 3))
    s = spinor_curvature_square_stats(rep, R)
    r2 = s["riemann_norm_sq"]
    assert abs(s["trace_sum"] - rep.N / 8 * r2) <= 1e-10 * r2
    assert s["op_norm"] <= s["hs_norm"] * (1 + 1e-12)
    assert s["op_norm"] <= math.sqrt(rep.N / 8) * r2 + 1e-10 * r2


@settings(max_examples=30, deadline=None)
@given(n=st.sampled_from([3, 4, 5, 6]), seed=st.integers(0, 2**31 - 1))
def test_representation_independence(n, seed):
    rep = build_clifford_rep(n)
    U = _unitary(seed, rep.N)
    rep_u = conjugated_rep(rep, U)
    anti, herm = rep_u.clifford_residuals()
    assert anti < 1e-12 and herm < 1e-12
    R = random_curvature_tensor(n, np.random.default_rng(seed + 1))
    a = spinor_curvature_square_stats(rep, R)
    b = spinor_curvature_square_stats(rep_u, R)
    for key in ("trace_sum", "hs_norm", "op_norm"):
        assert b[key] == pytest.approx(a[key], rel=1e-10)
