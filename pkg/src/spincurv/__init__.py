"""Numerical checks of curvature estimates for asymptotically flat spin manifolds.

Modules:
    clifford: gamma matrices and spinor curvature algebra.
    geometry: closed-form asymptotically flat metrics and their curvature.
    grid: Cartesian grids and sampled frame/connection data.
    dirac: spinor derivative, Dirac operator and the Dirac boundary problem.
    mass: ADM mass, boundary flux and the mass inequality.
    spinor_op: orthonormal Dirac families, the spinor operator and its exceptional set.
    sobolev: level-set profiles, co-area and Sobolev checks.
    estimates: second-derivative and curvature bounds, assembled report.
"""

__version__ = "0.1.0"
