"""Level sets of non-negative grid functions: volumes, areas, co-area and
layer-cake identities, and the Sobolev inequality ``||h||_q <= (q/k)||grad h||_2``.

Level-set areas use marching cubes (scikit-image) on the coordinate grid, with
each triangle's area measured in the metric interpolated to its centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates

from .grid import GridGeometry
from .spinor_op import gradient_norm_sq, sobolev_exponent

__all__ = [
    "LevelSetProfile",
    "default_thresholds",
    "level_profile",
    "layer_cake",
    "coarea_check",
    "sobolev_check",
    "SobolevResult",
    "reference_functions",
]


@dataclass
class LevelSetProfile:
    thresholds: np.ndarray
    volumes: np.ndarray
    areas: np.ndarray | None

    def rows(self):
        A = self.areas if self.areas is not None else [float("nan")] * len(self.thresholds)
        return [(float(u), float(v), float(a)) for u, v, a in zip(self.thresholds, self.volumes, A)]


def default_thresholds(h_max: float, count: int = 64, floor: float = 1e-4) -> np.ndarray:
    """Geometric levels from ``floor * h_max`` to ``h_max`` merged with evenly
    spaced levels from ``h_max / count`` to ``h_max``.

    The geometric part resolves the small-u tail, the even part the peak where
    the ``u^(q-1)`` weight of the layer-cake integral concentrates. The top
    level is pulled just below the maximum so the set is non-empty.
    """
    if h_max <= 0:
        return np.zeros(0)
    top = h_max * (1 - 1e-9)
    return np.unique(np.concatenate([np.geomspace(floor * h_max, top, count), np.linspace(h_max / count, top, count)]))


def _domain(geom: GridGeometry) -> np.ndarray:
    return geom.grid.active


def _metric_area(geom: GridGeometry, verts: np.ndarray, faces: np.ndarray) -> float:
    grid = geom.grid
    a = verts[faces[:, 1]] - verts[faces[:, 0]]
    b = verts[faces[:, 2]] - verts[faces[:, 0]]
    cen = verts[faces].mean(axis=1)
    idx = (cen / grid.h + grid.M).T
    G = geom.metric_box
    n = grid.n
    g = np.empty((len(cen), n, n))
    for i in range(n):
        for j in range(i, n):
            g[:, i, j] = g[:, j, i] = map_coordinates(G[..., i, j], idx, order=1)
    gaa = np.einsum("pi,pij,pj->p", a, g, a)
    gbb = np.einsum("pi,pij,pj->p", b, g, b)
    gab = np.einsum("pi,pij,pj->p", a, g, b)
    return float(0.5 * np.sum(np.sqrt(np.clip(gaa * gbb - gab**2, 0.0, None))))


def level_profile(h_box: np.ndarray, geom: GridGeometry, thresholds=None, with_area: bool = True) -> LevelSetProfile:
    """Riemannian volume of ``{h >= u}`` (cell counting) and area of ``{h = u}``.

    Areas need marching cubes and are available for n = 3 only.
    """
    grid = geom.grid
    dom = _domain(geom)
    vals = np.where(np.isfinite(h_box), h_box, 0.0)
    hmax = float(vals[dom].max()) if dom.any() else 0.0
    if np.any(vals[dom] < -1e-12):
        raise ValueError("level profiles need a non-negative function")
    u = default_thresholds(hmax) if thresholds is None else np.asarray(thresholds, dtype=float)
    if np.any(u < 0):
        raise ValueError("thresholds must be non-negative")
    w = geom.volume_weights[dom]
    hv = vals[dom]
    order = np.argsort(hv)
    hs, ws = hv[order], np.cumsum(w[order][::-1])[::-1]
    pos = np.searchsorted(hs, u, side="left")
    V = np.where(pos < len(hs), ws[np.minimum(pos, len(hs) - 1)], 0.0)
    A = None
    if with_area:
        if grid.n != 3:
            raise NotImplementedError("level-set areas are implemented for n = 3")
        from skimage.measure import marching_cubes

        field = np.where(dom, vals, 0.0)
        A = np.zeros(len(u))
        for k, lvl in enumerate(u):
            if lvl <= 0 or lvl >= hmax:
                continue
            try:
                verts, faces, _, _ = marching_cubes(field, level=lvl, spacing=(grid.h,) * 3, allow_degenerate=False)
            except RuntimeError:
                # only degenerate triangles at this level (it grazes a grid value)
                continue
            verts = verts - grid.M * grid.h
            A[k] = _metric_area(geom, verts, faces)
    return LevelSetProfile(u, V, A)


def _lp_norm_q(h_box, geom, q):
    dom = _domain(geom)
    return float(np.sum(geom.volume_weights[dom] * np.abs(h_box[dom]) ** q))


def _power_integral(u, F, s):
    """``int_0^u_max u^s F(u) du`` with F piecewise linear in ``log u`` between
    the levels (integrated exactly against ``u^s``) and constant below the
    lowest level."""
    u = np.asarray(u, dtype=float)
    F = np.asarray(F, dtype=float)
    if len(u) == 0:
        return 0.0
    a = s + 1.0
    total = F[0] * u[0] ** a / a
    t = np.log(u)
    for k in range(len(u) - 1):
        d = t[k + 1] - t[k]
        slope = (F[k + 1] - F[k]) / d
        E = np.expm1(a * d)
        total += u[k] ** a * (F[k] * E / a + slope * (d * (E + 1) / a - E / a**2))
    return float(total)


def layer_cake(h_box: np.ndarray, geom: GridGeometry, q: float, profile: LevelSetProfile | None = None):
    """``(||h||_q^q, q int u^(q-1) V_u du)`` and their relative discrepancy."""
    prof = profile or level_profile(h_box, geom, with_area=False)
    direct = _lp_norm_q(h_box, geom, q)
    u = prof.thresholds
    layered = q * _power_integral(u, prof.volumes, q - 1)
    rel = abs(direct - layered) / direct if direct > 0 else abs(layered)
    return direct, layered, rel


def coarea_check(h_box: np.ndarray, geom: GridGeometry, p: float, profile: LevelSetProfile | None = None):
    """``int h^p |grad h| dmu`` against ``int u^p A_u du``; returns (direct, profile side, relative error)."""
    if p <= 0:
        raise ValueError("p must be positive")
    dom = _domain(geom)
    g2 = gradient_norm_sq(h_box, geom)
    ok = dom & np.isfinite(g2)
    direct = float(np.sum(geom.volume_weights[ok] * np.abs(h_box[ok]) ** p * np.sqrt(g2[ok])))
    prof = profile or level_profile(h_box, geom)
    u = prof.thresholds
    side = _power_integral(u, prof.areas, p)
    if direct == 0 and side == 0:
        return 0.0, 0.0, 0.0
    rel = abs(direct - side) / max(abs(direct), 1e-300)
    return direct, side, rel


@dataclass
class SobolevResult:
    lhs: float
    rhs: float
    passed: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else float("inf"))


def sobolev_check(h_box: np.ndarray, geom: GridGeometry, k: float) -> SobolevResult:
    """``lhs = ||h||_q``, ``rhs = (q/k) ||grad h||_2`` with ``q = 2n/(n-2)``."""
    if k <= 0:
        raise ValueError("k must be positive")
    n = geom.grid.n
    q = sobolev_exponent(n)
    lhs = _lp_norm_q(h_box, geom, q) ** (1.0 / q)
    dom = _domain(geom)
    g2 = gradient_norm_sq(h_box, geom)
    ok = dom & np.isfinite(g2)
    rhs = (q / k) * float(np.sqrt(np.sum(geom.volume_weights[ok] * g2[ok])))
    return SobolevResult(lhs, rhs, bool(lhs <= rhs))


def reference_functions(geom: GridGeometry) -> dict:
    """Test functions on the grid: a unit Gaussian and the Sobolev extremal
    shape ``(1 + r^2)^(-1/2)`` shifted to vanish at ``R_max``."""
    r = geom.grid.radius
    R = geom.grid.R_max
    return {
        "gaussian": np.exp(-0.5 * r**2),
        "extremal": np.clip(1.0 / np.sqrt(1.0 + r**2) - 1.0 / np.sqrt(1.0 + R**2), 0.0, None),
    }
