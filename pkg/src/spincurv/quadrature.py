"""Product quadrature rules on coordinate spheres."""

from __future__ import annotations

import numpy as np
from scipy.special import roots_gegenbauer


def sphere_quadrature(n: int, n_theta: int = 32, n_phi: int = 64):
    """Nodes and weights on the unit sphere S^(n-1) in R^n.

    Gauss-Gegenbauer in ``cos(theta)`` for each polar angle (the ``sin^k``
    Jacobian is the Gegenbauer weight; k = 1 is Gauss-Legendre) and the
    trapezoid rule in the periodic azimuth. Weights sum to the sphere area.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    wphi = np.full(n_phi, 2 * np.pi / n_phi)
    if n == 2:
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), wphi
    polar = []
    for k in range(n - 2):
        power = n - 2 - k  # Jacobian sin^power(theta_k)
        # in t = cos(theta) the weight is (1 - t^2)^((power - 1)/2)
        t, w = roots_gegenbauer(n_theta, power / 2.0)
        polar.append((np.arccos(t), w))
    grids = np.meshgrid(*[p[0] for p in polar], phi, indexing="ij")
    wgrids = np.meshgrid(*[p[1] for p in polar], wphi, indexing="ij")
    weight = np.prod(wgrids, axis=0).ravel()
    angles = [a.ravel() for a in grids[:-1]]
    ph = grids[-1].ravel()
    x = np.empty((len(ph), n))
    s = np.ones(len(ph))
    for k, a in enumerate(angles):
        x[:, k] = s * np.cos(a)
        s = s * np.sin(a)
    x[:, n - 2] = s * np.cos(ph)
    x[:, n - 1] = s * np.sin(ph)
    return x, weight


def default_orders(n: int) -> tuple[int, int]:
    """Quadrature orders that keep the node count moderate in every dimension."""
    return {3: (24, 48), 4: (16, 32), 5: (10, 20)}.get(n, (8, 16))
