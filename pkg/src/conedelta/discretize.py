"""Finite element pencil for the zero angular momentum fibre.

The form discretized is the r-weighted meridian form

    a[u] = int (u_r^2 + u_z^2) r dr dz - alpha * int_gamma u^2 r dl,
    m[u] = int u^2 r dr dz,

with the common factor 2*pi dropped.  Bilinear elements on a uniform tensor
grid (cells cut diagonally by the curve become two linear triangles) over ``[0, r_max] x [z_min, z_max]``; homogeneous Dirichlet on the three
artificial far edges and the natural condition on the axis ``r = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import InvalidInput
from .geometry import ConeModel

_GL3_X, _GL3_W = np.polynomial.legendre.leggauss(3)
_GL3_X = 0.5 * (_GL3_X + 1.0)
_GL3_W = 0.5 * _GL3_W


def _as_int_ratio(length, h, what):
    q = length / h
    k = int(round(q))
    if k < 1 or abs(q - k) > 1e-9 * max(1.0, q):
        raise InvalidInput(f"{what}={length!r} is not an integer multiple of h={h!r}")
    return k


@dataclass(frozen=True)
class Grid:
    r_max: float
    z_min: float
    z_max: float
    h_r: float
    h_z: float
    nr: int = field(init=False)
    nz: int = field(init=False)

    def __post_init__(self):
        if not (self.r_max > 0 and self.h_r > 0 and self.h_z > 0 and self.z_max > self.z_min):
            raise InvalidInput("grid needs r_max > 0, h > 0 and z_max > z_min")
        object.__setattr__(self, "nr", _as_int_ratio(self.r_max, self.h_r, "r_max") + 1)
        object.__setattr__(self, "nz", _as_int_ratio(self.z_max - self.z_min, self.h_z, "z extent") + 1)

    @property
    def shape(self):
        return (self.nr, self.nz)

    @property
    def r_nodes(self):
        return self.h_r * np.arange(self.nr)

    @property
    def z_nodes(self):
        return self.z_min + self.h_z * np.arange(self.nz)

    @property
    def index(self) -> np.ndarray:
        """``(nr, nz)`` map from node to unknown number, ``-1`` on Dirichlet edges."""
        idx = -np.ones((self.nr, self.nz), dtype=np.int64)
        nfree_z = self.nz - 2
        ii, jj = np.meshgrid(np.arange(self.nr - 1), np.arange(1, self.nz - 1), indexing="ij")
        idx[ii, jj] = ii * nfree_z + (jj - 1)
        return idx

    @property
    def n_unknowns(self) -> int:
        return (self.nr - 1) * (self.nz - 2)

    def unknown_coords(self):
        """``(r, z)`` of every unknown, in unknown order."""
        rr, zz = np.meshgrid(self.r_nodes[:-1], self.z_nodes[1:-1], indexing="ij")
        return rr.ravel(), zz.ravel()

    def describe(self) -> dict:
        return {"r_max": self.r_max, "z_min": self.z_min, "z_max": self.z_max,
                "h_r": self.h_r, "h_z": self.h_z, "nr": self.nr, "nz": self.nz}


def build_grid(model: ConeModel, r_max: float, z_extent: float, h: float) -> Grid:
    """Uniform grid on ``[0, r_max] x [-z_extent, z_extent]`` with spacing ``h``."""
    if h <= 0 or r_max <= 0 or z_extent <= 0:
        raise InvalidInput("r_max, z_extent and h must be positive")
    grid = Grid(float(r_max), -float(z_extent), float(z_extent), float(h), float(h))
    # the ray must leave the box through a far edge, never through the axis
    if z_extent <= 0:
        raise InvalidInput("z range must cover the apex")
    return grid


def default_grid(model: ConeModel, scale: float = 1.0) -> Grid:
    """Box of half-size ``24/alpha`` with ``h = 0.25/alpha``, times ``scale``."""
    a = model.alpha
    return build_grid(model, 24.0 * scale / a, 24.0 * scale / a, 0.25 / a)


# ------------------------------------------------------------------ generatrix

@dataclass(frozen=True)
class Generatrix:
    """Meridian curve of an axisymmetric surface.

    ``vertices`` is an ``(m, 2)`` array of ``(r, z)`` points starting on the
    axis.  Beyond the last vertex the curve continues to infinity along the
    ray of half-angle ``theta``.  ``R0`` bounds the deformed part: every point
    at distance ``> R0`` from the origin lies on the ray.
    """

    vertices: np.ndarray
    theta: float
    R0: float = 0.0
    straight: bool = True

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 1:
            raise InvalidInput("generatrix vertices must be an (m, 2) array")
        object.__setattr__(self, "vertices", v)
        if abs(v[0, 0]) > 1e-12:
            raise InvalidInput("generatrix must start on the symmetry axis r = 0")
        if np.any(v[:, 0] < -1e-12):
            raise InvalidInput("generatrix leaves the half-plane r >= 0")
        seg = np.diff(v, axis=0)
        if len(seg) and np.min(np.hypot(seg[:, 0], seg[:, 1])) <= 1e-14:
            raise InvalidInput("degenerate (zero length) generatrix segment")
        if not self.on_ray_beyond(self.R0):
            raise InvalidInput("generatrix does not coincide with the ray beyond R0")
        if not self.is_simple():
            raise InvalidInput("generatrix polyline self-intersects")

    @classmethod
    def straight_ray(cls, theta: float) -> "Generatrix":
        return cls(np.array([[0.0, 0.0]]), theta, 0.0, True)

    @classmethod
    def from_polyline(cls, vertices, theta: float, tol: float = 1e-9) -> "Generatrix":
        """Build from vertices; ``R0`` is the largest radius of an off-ray vertex."""
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidInput("polyline must have two columns r z")
        t = v[:, 0] * math.cos(theta) - v[:, 1] * math.sin(theta)
        s = v[:, 0] * math.sin(theta) + v[:, 1] * math.cos(theta)
        off = (np.abs(t) > tol) | (s < -tol)
        if off[-1]:
            raise InvalidInput("last polyline vertex must lie on the ray")
        # a segment between two on-ray vertices lies on the ray, so the
        # deformation radius is set by the off-ray vertices and their neighbours
        radius = np.hypot(v[:, 0], v[:, 1])
        R0 = 0.0
        if off.any():
            k = np.nonzero(off)[0]
            k = np.unique(np.clip(np.concatenate([k, k + 1]), 0, len(v) - 1))
            R0 = float(radius[k].max())
        return cls(v, theta, R0, not off.any())

    @classmethod
    def from_file(cls, path, theta: float) -> "Generatrix":
        """Read ``r z`` pairs, one per line, ``#`` starts a comment."""
        data = np.loadtxt(Path(path), comments="#", ndmin=2)
        return cls.from_polyline(data, theta)

    @classmethod
    def bump(cls, theta: float, R0: float, amplitude: float, n_vertices: int = 64) -> "Generatrix":
        """Ray pushed off itself by ``amplitude * sin^2(pi s / R0)`` for ``s < R0``."""
        if R0 <= 0 or n_vertices < 3:
            raise InvalidInput("bump needs R0 > 0 and at least 3 vertices")
        s = np.linspace(0.0, R0, n_vertices)
        d = amplitude * np.sin(np.pi * s / R0) ** 2
        r = s * math.sin(theta) + d * math.cos(theta)
        z = s * math.cos(theta) - d * math.sin(theta)
        gen = cls.from_polyline(np.column_stack([r, z]), theta)
        return gen

    def on_ray_beyond(self, R0: float, tol: float = 1e-9) -> bool:
        """Vertex check that the curve coincides with the ray outside radius ``R0``."""
        v = self.vertices
        radius = np.hypot(v[:, 0], v[:, 1])
        t = v[:, 0] * math.cos(self.theta) - v[:, 1] * math.sin(self.theta)
        s = v[:, 0] * math.sin(self.theta) + v[:, 1] * math.cos(self.theta)
        far = radius > R0 * (1 + 1e-12) + tol
        return bool(np.all(np.abs(t[far]) <= tol * max(1.0, R0)) and np.all(s[far] >= -tol))

    def is_simple(self) -> bool:
        pts = self.points(far=None)
        segs = np.stack([pts[:-1], pts[1:]], axis=1)
        m = len(segs)
        for a in range(m):
            for b in range(a + 2, m):
                if _segments_intersect(segs[a], segs[b]):
                    return False
        return True

    def points(self, far: float | None) -> np.ndarray:
        """Vertices plus, if ``far`` is given, a point on the ray at radius ``far``."""
        v = self.vertices
        if far is None:
            return v
        direction = np.array([math.sin(self.theta), math.cos(self.theta)])
        last = v[-1]
        if np.hypot(*last) >= far:
            return v
        return np.vstack([v, direction * far])

    def describe(self) -> dict:
        return {"kind": "straight" if self.straight else "deformed", "theta": self.theta,
                "R0": self.R0, "n_vertices": int(len(self.vertices))}


def _segments_intersect(p, q) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(q[0], q[1], p[0])
    d2 = orient(q[0], q[1], p[1])
    d3 = orient(p[0], p[1], q[0])
    d4 = orient(p[0], p[1], q[1])
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def cut_segments(grid: Grid, points: np.ndarray):
    """Split a polyline into pieces that each lie in a single grid cell.

    Returns ``(ei, ej, p0, p1)``: cell indices and piece end points.  Pieces
    outside the box are dropped.
    """
    ei, ej, p0s, p1s = [], [], [], []
    r_lo, r_hi, z_lo, z_hi = 0.0, grid.r_max, grid.z_min, grid.z_max
    for a, b in zip(points[:-1], points[1:]):
        d = b - a
        # clip the segment to the box (Liang-Barsky)
        lo, hi = 0.0, 1.0
        for pk, qk in ((-d[0], a[0] - r_lo), (d[0], r_hi - a[0]), (-d[1], a[1] - z_lo), (d[1], z_hi - a[1])):
            if pk == 0.0:
                if qk < 0:
                    lo, hi = 1.0, 0.0
                continue
            lam = qk / pk
            if pk < 0:
                lo = max(lo, lam)
            else:
                hi = min(hi, lam)
        if hi <= lo:
            continue
        cuts = [lo, hi]
        for axis, h, origin in ((0, grid.h_r, 0.0), (1, grid.h_z, grid.z_min)):
            if d[axis] == 0.0:
                continue
            x0 = a[axis] + lo * d[axis]
            x1 = a[axis] + hi * d[axis]
            k0 = math.ceil((min(x0, x1) - origin) / h)
            k1 = math.floor((max(x0, x1) - origin) / h)
            ks = np.arange(k0, k1 + 1)
            lam = (origin + ks * h - a[axis]) / d[axis]
            cuts.extend(lam[(lam > lo) & (lam < hi)].tolist())
        cuts = np.unique(np.asarray(cuts))
        for la, lb in zip(cuts[:-1], cuts[1:]):
            if lb - la <= 1e-13:
                continue
            pa = a + la * d
            pb = a + lb * d
            mid = 0.5 * (pa + pb)
            i = min(max(int(math.floor(mid[0] / grid.h_r)), 0), grid.nr - 2)
            j = min(max(int(math.floor((mid[1] - grid.z_min) / grid.h_z)), 0), grid.nz - 2)
            ei.append(i)
            ej.append(j)
            p0s.append(pa)
            p1s.append(pb)
    if not ei:
        raise InvalidInput("generatrix does not intersect the grid box")
    return (np.asarray(ei, dtype=np.int64), np.asarray(ej, dtype=np.int64),
            np.asarray(p0s), np.asarray(p1s))


def line_quadrature(grid: Grid, points: np.ndarray):
    """Three-point Gauss rule on every cell piece of the polyline.

    Along a straight piece a bilinear ``u`` is quadratic, so ``u^2 r`` has
    degree five and the rule is exact.
    """
    ei, ej, p0, p1 = cut_segments(grid, points)
    length = np.hypot(*(p1 - p0).T)
    x = p0[:, None, :] + _GL3_X[None, :, None] * (p1 - p0)[:, None, :]
    r = x[..., 0]
    xi = (r - ei[:, None] * grid.h_r) / grid.h_r
    eta = (x[..., 1] - (grid.z_min + ej[:, None] * grid.h_z)) / grid.h_z
    w = _GL3_W[None, :] * length[:, None] * r
    return ei, ej, np.clip(xi, 0.0, 1.0), np.clip(eta, 0.0, 1.0), w


def cell_kinds(grid: Grid, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Mark cells whose curve piece runs along a diagonal.

    Such a cell is split into two linear triangles along that diagonal
    (kind 1 for the ``(0,0)-(1,1)`` diagonal, kind 2 for ``(1,0)-(0,1)``),
    which lets the discrete field carry a kink exactly on the curve.  Both
    triangles keep the bilinear traces on the cell edges, so the space stays
    conforming.  Every other cell is bilinear (kind 0).
    """
    kind = np.zeros((grid.nr - 1, grid.nz - 1), dtype=np.int64)
    ei, ej, p0, p1 = cut_segments(grid, points)
    x0 = (p0[:, 0] - ei * grid.h_r) / grid.h_r
    y0 = (p0[:, 1] - (grid.z_min + ej * grid.h_z)) / grid.h_z
    x1 = (p1[:, 0] - ei * grid.h_r) / grid.h_r
    y1 = (p1[:, 1] - (grid.z_min + ej * grid.h_z)) / grid.h_z
    d1 = (np.abs(x0 - y0) < tol) & (np.abs(x1 - y1) < tol)
    d2 = (np.abs(x0 + y0 - 1) < tol) & (np.abs(x1 + y1 - 1) < tol)
    kind[ei[d1], ej[d1]] = 1
    kind[ei[d2], ej[d2]] = 2
    return kind


# ------------------------------------------------------------------- assembly

@dataclass(frozen=True)
class Pencil:
    """``A x = lambda M x`` with ``A = K - alpha L`` and diagonal ``M``."""

    stiffness: sp.csr_matrix
    line: sp.csr_matrix
    mass: np.ndarray
    model: ConeModel
    grid: Grid
    generatrix: Generatrix

    @property
    def A(self) -> sp.csr_matrix:
        return (self.stiffness - self.model.alpha * self.line).tocsr()

    @property
    def M(self) -> sp.dia_matrix:
        return sp.diags(self.mass)

    @property
    def n(self) -> int:
        return len(self.mass)

    def describe(self) -> dict:
        return {"alpha": self.model.alpha, "theta": self.model.theta, "grid": self.grid.describe(),
                "generatrix": self.generatrix.describe(), "n_unknowns": self.n}


def _to_csr(rows, cols, vals, n):
    """COO -> CSR with duplicates summed in input order.

    scipy's own duplicate summation sorts with an unstable sort, which can
    break exact symmetry by a rounding; bincount accumulates sequentially, so
    mirrored entries built from mirrored triplets stay bitwise equal.
    """
    key = rows * n + cols
    uniq, inv = np.unique(key, return_inverse=True)
    data = np.bincount(inv, weights=vals, minlength=len(uniq))
    return sp.csr_matrix((data, (uniq // n, uniq % n)), shape=(n, n))


def _check_inside(grid: Grid, gen: Generatrix):
    v = gen.vertices
    if (v[:, 0].max() > grid.r_max or v[:, 1].min() < grid.z_min or v[:, 1].max() > grid.z_max):
        raise InvalidInput("generatrix vertices lie outside the grid box")


def assemble(grid: Grid, model: ConeModel, generatrix: Generatrix | None = None) -> Pencil:
    """Assemble the pencil for the straight cone (default) or a given generatrix."""
    gen = generatrix if generatrix is not None else Generatrix.straight_ray(model.theta)
    if abs(gen.theta - model.theta) > 1e-15:
        raise InvalidInput("generatrix angle differs from the model angle")
    _check_inside(grid, gen)
    index = grid.index
    n = grid.n_unknowns
    far = 2.0 * math.hypot(grid.r_max, max(abs(grid.z_min), abs(grid.z_max)))
    pts = gen.points(far)
    kind = cell_kinds(grid, pts)
    rows, cols, vals, mass = _kernels.element_coo(index, kind, grid.r_nodes, grid.h_r, grid.h_z)
    K = _to_csr(rows, cols, vals, n)
    ei, ej, xi, eta, w = line_quadrature(grid, pts)
    lr, lc, lv = _kernels.segment_coo(index, kind, ei, ej, xi, eta, w)
    L = _to_csr(lr, lc, lv, n)
    return Pencil(K, L, mass, model, grid, gen)


def assemble_deformed(grid: Grid, model: ConeModel, generatrix: Generatrix) -> Pencil:
    """Same pipeline as :func:`assemble` for a locally deformed generatrix."""
    if not generatrix.on_ray_beyond(generatrix.R0):
        raise InvalidInput("generatrix is not a local deformation of the ray")
    return assemble(grid, model, generatrix)
