"""Cartesian grids on truncated annular domains and per-point geometry."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import ceil

import numpy as np
from scipy import ndimage

from .clifford import CliffordRep, build_clifford_rep
from .geometry import MetricField, christoffel, frame_and_connection, metric_derivatives, riemann_frame, riemann_gradient_frame

__all__ = ["Grid", "GridGeometry", "central_diff"]

_CHUNK = 40_000


@dataclass
class Grid:
    """Uniform grid on ``[-L, L]^n`` restricted to ``r_core <= |x| < R_max``.

    Points with ``|x| >= R_max`` carry Dirichlet data; points inside the core
    ball are ghosts filled by a radial reflection across ``|x| = r_core``
    (discrete homogeneous Neumann closure). The box extends ``layers + 1``
    points beyond ``R_max`` so every active point has full stencils for up to
    ``layers`` nested central differences.
    """

    n: int
    h: float
    r_core: float
    R_max: float
    layers: int = 2

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")
        if self.R_max <= self.r_core:
            raise ValueError("R_max must exceed r_core")
        if self.r_core < 0:
            raise ValueError("r_core must be non-negative")
        self.M = int(ceil(self.R_max / self.h)) + self.layers + 1
        self.shape = (2 * self.M + 1,) * self.n

    @classmethod
    def for_metric(cls, metric: MetricField, h: float, R_max: float, r_core: float | None = None, **kw) -> "Grid":
        rc = metric.r_core if r_core is None else r_core
        return cls(metric.n, h, rc, R_max, **kw)

    @cached_property
    def axis(self) -> np.ndarray:
        return self.h * np.arange(-self.M, self.M + 1)

    @cached_property
    def points(self) -> np.ndarray:
        """Coordinates, shape ``shape + (n,)``."""
        return np.stack(np.meshgrid(*([self.axis] * self.n), indexing="ij"), axis=-1)

    @cached_property
    def radius(self) -> np.ndarray:
        return np.sqrt(np.sum(self.points**2, axis=-1))

    @cached_property
    def inner(self) -> np.ndarray:
        return self.radius < self.r_core

    @cached_property
    def outer(self) -> np.ndarray:
        return self.radius >= self.R_max

    @cached_property
    def active(self) -> np.ndarray:
        return ~(self.inner | self.outer)

    def _dilate(self, mask, radius, cube=True):
        struct = np.ones((3,) * self.n, bool) if cube else ndimage.generate_binary_structure(self.n, 1)
        if radius <= 0:
            return mask.copy()
        return ndimage.binary_dilation(mask, structure=struct, iterations=radius)

    @cached_property
    def rows(self) -> np.ndarray:
        """Equation points: active plus the first outer ring."""
        return self.active | (self.outer & self._dilate(self.active, 1, cube=False))

    @cached_property
    def ghosts(self) -> np.ndarray:
        """Inner points reachable from active points within the stencil depth."""
        return self.inner & self._dilate(self.active, self.layers + 1)

    def interior(self, depth: int) -> np.ndarray:
        """Active points whose depth-neighbourhood avoids the ghost region."""
        bad = self._dilate(self.inner, depth)
        edge = np.zeros(self.shape, bool)
        sl = [slice(depth + 1, -depth - 1)] * self.n
        edge[tuple(sl)] = True
        return self.active & ~bad & edge

    @cached_property
    def mirror_index(self) -> np.ndarray:
        """Flat box index of the active point that fills each ghost."""
        gidx = np.flatnonzero(self.ghosts.ravel())
        pts = self.points.reshape(-1, self.n)[gidx]
        r = np.linalg.norm(pts, axis=1)
        dirs = np.where(r[:, None] > 0, pts / np.where(r > 0, r, 1.0)[:, None], np.eye(self.n)[0])
        target = np.maximum(2 * self.r_core - r, self.r_core)
        act = self.active.ravel()
        out = np.empty(len(gidx), dtype=np.int64)
        for k in range(len(gidx)):
            t = target[k]
            while True:
                ij = np.rint(dirs[k] * t / self.h).astype(int) + self.M
                flat = np.ravel_multi_index(tuple(ij), self.shape)
                if act[flat]:
                    out[k] = flat
                    break
                t += 0.25 * self.h
        return out

    @cached_property
    def ghost_flat(self) -> np.ndarray:
        return np.flatnonzero(self.ghosts.ravel())

    def apply_closure(self, field: np.ndarray, weight: np.ndarray | None = None) -> np.ndarray:
        """Fill ghost values in place from their mirror points; returns field.

        With ``weight`` the copy acts on ``weight * field`` instead.
        """
        flat = field.reshape((-1,) + field.shape[self.n:])
        if weight is None:
            flat[self.ghost_flat] = flat[self.mirror_index]
        else:
            w = weight.ravel()
            ratio = w[self.mirror_index] / w[self.ghost_flat]
            flat[self.ghost_flat] = flat[self.mirror_index] * ratio.reshape((-1,) + (1,) * (flat.ndim - 1))
        return field

    def spinor_field(self, active_values: np.ndarray, outer_value: np.ndarray, weight: np.ndarray | None = None) -> np.ndarray:
        """Box field from values on active points and constant outer data."""
        N = len(outer_value)
        F = np.zeros(self.shape + (N,), dtype=complex)
        F[self.active] = active_values
        F[self.outer] = outer_value
        return self.apply_closure(F, weight)

    @property
    def cell_volume(self) -> float:
        return self.h**self.n


def central_diff(F: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second-order central difference along a grid axis; edges are NaN."""
    out = np.full(F.shape, np.nan, dtype=np.result_type(F, float))
    n = F.ndim
    lo = [slice(None)] * n
    hi = [slice(None)] * n
    mid = [slice(None)] * n
    lo[axis], hi[axis], mid[axis] = slice(None, -2), slice(2, None), slice(1, -1)
    out[tuple(mid)] = (F[tuple(hi)] - F[tuple(lo)]) / (2.0 * h)
    return out


def _eval_chunks(func, pts, mask, out_shapes, fill):
    """Evaluate ``func`` on masked points in chunks into preallocated arrays."""
    flat_idx = np.flatnonzero(mask.ravel())
    P = mask.size
    outs = [np.empty((P,) + s) for s in out_shapes]
    for o, f in zip(outs, fill):
        o[...] = f
    flat_pts = pts.reshape(P, -1)
    for start in range(0, len(flat_idx), _CHUNK):
        sel = flat_idx[start:start + _CHUNK]
        res = func(flat_pts[sel])
        for o, v in zip(outs, res):
            o[sel] = v
    return [o.reshape(mask.shape + s) for o, s in zip(outs, out_shapes)]


@dataclass
class GridGeometry:
    """Frame, connection and volume data of a metric sampled on a grid.

    Geometry is evaluated at every box point outside half the core radius;
    points closer to the origin get flat placeholders and are never used by
    interior evaluations.
    """

    metric: MetricField
    grid: Grid
    rep: CliffordRep = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.metric.n != self.grid.n:
            raise ValueError("metric and grid dimensions differ")
        if self.rep is None:
            self.rep = build_clifford_rep(self.metric.n)
        n = self.metric.n
        g = self.grid
        self.valid = g.radius >= 0.5 * g.r_core if g.r_core > 0 else np.ones(g.shape, bool)
        # box corners beyond the deepest stencil are never read
        self.valid &= g.radius <= g.R_max + (g.layers + 1) * g.h * np.sqrt(g.n)
        if self.metric.family != "flat" and self.metric.m_param > 0:
            self.valid &= g.radius > 0

        kappa = (n - 1) / (2.0 * n)

        def frame_data(x):
            gg, dg, _ = metric_derivatives(self.metric, x)
            G, _ = christoffel(gg, dg, np.zeros(dg.shape[:-3] + (n,) * 4))
            e, _, omega, div_e = frame_and_connection(gg, dg, G)
            # d_i log sqrt(det g) = G^k_{ki}
            dlog = kappa * np.einsum("...kki->...i", G)
            return np.sqrt(np.linalg.det(gg)), e, omega, div_e, np.einsum("...ia,...i->...a", e, dlog)

        eye = np.eye(n)
        self.sqrtg, self.frame, self.omega, self.div_frame, self.dlog_weight = _eval_chunks(
            frame_data, g.points, self.valid, [(), (n, n), (n, n, n), (n,), (n,)], [1.0, eye, 0.0, 0.0, 0.0]
        )
        # differences act on weight * psi; for conformally flat metrics the
        # Dirac equation for that product is the flat one
        self.weight = self.sqrtg**kappa
        gam = self.rep.gamma
        gg = np.einsum("bij,cjk->bcik", gam, gam)
        # spinor connection Omega_a = 1/4 sum_{b,c} omega[a,b,c] gamma_b gamma_c
        self.spin_conn = 0.25 * np.einsum("...abc,bcij->...aij", self.omega, gg)

    @property
    def N(self) -> int:
        return self.rep.N

    @cached_property
    def metric_box(self) -> np.ndarray:
        """``g_ij`` at every box point, from the frame (``g^-1 = e e^T``)."""
        ginv = np.einsum("...ia,...ja->...ij", self.frame, self.frame)
        return np.linalg.inv(ginv)

    @property
    def volume_weights(self) -> np.ndarray:
        return self.sqrtg * self.grid.cell_volume

    def point_curvature(self, mask: np.ndarray, with_gradient: bool = False) -> dict:
        """Frame curvature data at masked points (flattened in C order)."""
        key = (mask.tobytes().__hash__(), with_gradient)
        if key in self._cache:
            return self._cache[key]
        pts = self.grid.points[mask]
        n = self.metric.n
        chunks = {"riemann": [], "grad_riemann": []}
        for start in range(0, len(pts), _CHUNK // 4 if with_gradient else _CHUNK):
            x = pts[start:start + (_CHUNK // 4 if with_gradient else _CHUNK)]
            if with_gradient:
                nR, R = riemann_gradient_frame(self.metric, x)
                chunks["grad_riemann"].append(nR)
            else:
                R = riemann_frame(self.metric, x)[0]
            chunks["riemann"].append(R)
        R = np.concatenate(chunks["riemann"]) if pts.size else np.zeros((0,) + (n,) * 4)
        ric = np.einsum("pcacb->pab", R)
        out = {
            "riemann": R,
            "ricci": ric,
            "scalar": np.einsum("paa->p", ric),
            "riemann_norm_sq": np.sum(R**2, axis=(1, 2, 3, 4)),
        }
        if with_gradient:
            nR = np.concatenate(chunks["grad_riemann"]) if pts.size else np.zeros((0,) + (n,) * 5)
            out["grad_riemann"] = nR
            out["riemann_grad_norm"] = np.sqrt(np.sum(nR**2, axis=(1, 2, 3, 4, 5)))
        self._cache[key] = out
        return out

    def scalar_curvature(self, mask: np.ndarray) -> np.ndarray:
        return self.point_curvature(mask)["scalar"]
