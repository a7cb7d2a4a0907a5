"""
Spinors and curvature at a single point
=======================================

Gamma matrices, the spinor curvature endomorphisms and the trace identity
that ties ``sum R^S(a, b)^2`` to ``|R|^2``. Everything here is exact algebra.
"""

import numpy as np

from spincurv.clifford import (
    build_clifford_rep,
    constant_curvature_tensor,
    random_curvature_tensor,
    spinor_curvature,
    spinor_curvature_square_stats,
)

# Anti-Hermitian generators with gamma_a gamma_b + gamma_b gamma_a = -2 delta_ab.
for n in (3, 4, 5, 6):
    rep = build_clifford_rep(n)
    anti, herm = rep.clifford_residuals()
    print(f"n={n}: spinor dimension N={rep.N}, residuals {anti:.1e} {herm:.1e}")

# The round sphere has R_abcd = d_ac d_bd - d_ad d_bc. Its squared spinor
# curvature has trace -N/8 |R|^2, which is -3 in three dimensions.
rep = build_clifford_rep(3)
stats = spinor_curvature_square_stats(rep, constant_curvature_tensor(3))
print("constant curvature:", {k: float(v) for k, v in stats.items()})

# The same identity for random algebraic curvature tensors, and the bound on
# the operator norm of the square.
rng = np.random.default_rng(0)
R = np.stack([random_curvature_tensor(4, rng) for _ in range(5)])
st = spinor_curvature_square_stats(build_clifford_rep(4), R)
print("trace / (N/8 |R|^2):", st["trace_sum"] / (4 / 8 * st["riemann_norm_sq"]))
print("op norm / (sqrt(N/8) |R|^2):", st["op_norm"] / (np.sqrt(4 / 8) * st["riemann_norm_sq"]))

# R^S(a, b) is antisymmetric in (a, b) and anti-Hermitian as a matrix.
RS = spinor_curvature(rep, random_curvature_tensor(3, rng))
print("antisymmetry:", np.abs(RS + RS.transpose(1, 0, 2, 3)).max())
print("anti-Hermitian:", np.abs(RS + RS.conj().transpose(0, 1, 3, 2)).max())
