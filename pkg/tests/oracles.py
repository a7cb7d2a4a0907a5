"""Independent symbolic references for conformally flat metrics ``g = u^4 delta`` (n = 3)."""

from __future__ import annotations

from functools import lru_cache

import sympy as sp

X = sp.symbols("x0:3", real=True)


def schwarzschild_factor(m):
    r = sp.sqrt(sum(x**2 for x in X))
    return 1 + sp.Rational(m) / (2 * r) if isinstance(m, int) else 1 + m / (2 * r)


@lru_cache(maxsize=None)
def curvature(m: int = 1):
    """Christoffels, coordinate Riemann ``R^a_{bcd}`` and metric for ``u = 1 + m/(2r)``."""
    u = schwarzschild_factor(m)
    g = sp.diag(*([u**4] * 3))
    gi = sp.diag(*([u**-4] * 3))
    G = [[[sp.simplify(sum(gi[a, d] * (sp.diff(g[d, b], X[c]) + sp.diff(g[d, c], X[b]) - sp.diff(g[b, c], X[d]))
                               for d in range(3)) / 2) for c in range(3)] for b in range(3)] for a in range(3)]
    R = {}
    for a in range(3):
        for b in range(3):
            for c in range(3):
                for d in range(3):
                    e = sp.diff(G[a][b][d], X[c]) - sp.diff(G[a][b][c], X[d])
                    e += sum(G[a][c][k] * G[k][b][d] - G[a][d][k] * G[k][b][c] for k in range(3))
                    R[a, b, c, d] = e
    return u, g, gi, G, R


def scalar_curvature(m: int = 1):
    u, g, gi, G, R = curvature(m)
    ric = [[sum(R[a, b, a, d] for a in range(3)) for d in range(3)] for b in range(3)]
    return sum(gi[b, d] * ric[b][d] for b in range(3) for d in range(3))


def riemann_norm_sq_at(point, m: int = 1) -> float:
    """``|R|_g^2`` at a point, lowering with g and raising with g^{-1}."""
    u, g, gi, G, R = curvature(m)
    sub = dict(zip(X, point))
    uval = float(u.subs(sub))
    # g = u^4 delta: |R|^2 = sum (R^a_bcd)^2 * g_aa g^bb g^cc g^dd = u^-8 sum (R^a_bcd)^2
    tot = sum(float(v.subs(sub)) ** 2 for v in R.values())
    return tot * uval ** (-8)


def riemann_grad_norm_at(point, m: int = 1) -> float:
    """``|nabla R|_g`` at a point from the fully covariant tensor ``R_abcd``."""
    u, g, gi, G, R = curvature(m)
    Rl = {k: u**4 * v for k, v in R.items()}  # lower the first index
    sub = dict(zip(X, point))
    Gv = [[[float(G[a][b][c].subs(sub)) for c in range(3)] for b in range(3)] for a in range(3)]
    Rv = {k: float(v.subs(sub)) for k, v in Rl.items()}
    dR = {(e,) + k: float(sp.diff(v, X[e]).subs(sub)) for k, v in Rl.items() for e in range(3)}
    tot = 0.0
    for e in range(3):
        for a in range(3):
            for b in range(3):
                for c in range(3):
                    for d in range(3):
                        v = dR[e, a, b, c, d]
                        for k in range(3):
                            v -= Gv[k][e][a] * Rv[k, b, c, d] + Gv[k][e][b] * Rv[a, k, c, d]
                            v -= Gv[k][e][c] * Rv[a, b, k, d] + Gv[k][e][d] * Rv[a, b, c, k]
                        tot += v * v
    uval = float(u.subs(sub))
    return (tot * uval ** (-20)) ** 0.5


def adm_integrand_limit(m: int = 1) -> sp.Expr:
    """``lim_{rho -> inf} (1/16 pi) int_{S_rho} (d_j g_ij - d_i g_jj) nu^i dA``, evaluated
    symbolically along the x0 axis (the integrand is rotation invariant)."""
    u = schwarzschild_factor(m)
    g = [[u**4 if i == j else 0 for j in range(3)] for i in range(3)]
    flux_i = [sum(sp.diff(g[i][j], X[j]) - sp.diff(g[j][j], X[i]) for j in range(3)) for i in range(3)]
    rho = sp.symbols("rho", positive=True)
    radial = flux_i[0].subs({X[0]: rho, X[1]: 0, X[2]: 0})
    total = sp.simplify(radial * 4 * sp.pi * rho**2 / (16 * sp.pi))
    return sp.limit(total, rho, sp.oo)
