"""Jets, sphere quadrature and the grid layout."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spincurv.geometry import unit_sphere_area
from spincurv.grid import Grid, central_diff
from spincurv.jets import Jet
from spincurv.quadrature import default_orders, sphere_quadrature


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_jet_chain_rule(p):
    x = np.array([p])
    a, b, c = Jet.variables(x)
    f = (a * b + c * c).exp() * 0.5 - a ** 3
    # closed form
    s = p[0] * p[1] + p[2] ** 2
    e = math.exp(s)
    grad = np.array([0.5 * e * p[1] - 3 * p[0] ** 2, 0.5 * e * p[0], e * p[2]])
    ds = np.array([p[1], p[0], 2 * p[2]])
    hs = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 2]], dtype=float)
    hess = 0.5 * e * (np.outer(ds, ds) + hs)
    hess[0, 0] -= 6 * p[0]
    assert f.val[0] == pytest.approx(0.5 * e - p[0] ** 3, rel=1e-12, abs=1e-12)
    assert np.allclose(f.grad[0], grad, rtol=1e-12, atol=1e-12)
    assert np.allclose(f.hess[0], hess, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("n", [3, 4, 5])
def test_sphere_quadrature_area_and_moments(n):
    x, w = sphere_quadrature(n, *default_orders(n))
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0)
    area = unit_sphere_area(n)
    assert w.sum() == pytest.approx(area, rel=1e-12)
    # int x_1^2 = area / n, int x_1^4 = 3 area / (n (n + 2))
    assert np.dot(w, x[:, 0] ** 2) == pytest.approx(area / n, rel=1e-12)
    assert np.dot(w, x[:, -1] ** 4) == pytest.approx(3 * area / (n * (n + 2)), rel=1e-12)


def test_grid_masks_partition():
    g = Grid(3, 0.5, 1.0, 3.0)
    assert not np.any(g.active & g.inner) and not np.any(g.active & g.outer)
    assert np.all(g.interior(2) <= g.interior(1))
    assert np.all(g.interior(1) <= g.active)
    assert g.cell_volume == 0.125
    # every ghost is filled from an active point
    assert g.active.ravel()[g.mirror_index].all()


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid(3, 0.0, 0.0, 2.0)
    with pytest.raises(ValueError):
        Grid(3, 0.5, 3.0, 2.0)


def test_central_diff_exact_on_quadratics():
    g = Grid(3, 0.25, 0.0, 2.0)
    f = g.points[..., 0] ** 2 + g.points[..., 1]
    d = central_diff(f, 0, g.h)
    inner = g.interior(1)
    assert np.allclose(d[inner], 2 * g.points[..., 0][inner], atol=1e-12)
