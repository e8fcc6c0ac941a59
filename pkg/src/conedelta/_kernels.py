"""Hot assembly loops, compiled with numba when available.

Every kernel has a pure-numpy twin.  Set ``CONEDELTA_NO_NUMBA=1`` in the
environment (before import) to force the numpy path, or call
:func:`set_backend` at runtime.  Both paths produce identical COO triplets in
the same order, so downstream matrices agree bit for bit.
"""
from __future__ import annotations

import os
import warnings

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False
    warnings.warn("numba not importable; falling back to numpy kernels")

    def njit(*args, **kwargs):
        def deco(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return deco


_BACKEND = "numpy" if (not HAVE_NUMBA or os.environ.get("CONEDELTA_NO_NUMBA", "") not in ("", "0")) else "numba"


def backend() -> str:
    return _BACKEND


def set_backend(name: str) -> None:
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _BACKEND = name


# Q1 shape functions on the unit square, local node order
# 0:(0,0) 1:(1,0) 2:(1,1) 3:(0,1)
_XI = np.array([0.0, 1.0, 1.0, 0.0])
_ETA = np.array([0.0, 0.0, 1.0, 1.0])


def q1_shape(xi, eta):
    """Bilinear shape functions, shape ``(..., 4)``."""
    xi = np.asarray(xi, dtype=float)[..., None]
    eta = np.asarray(eta, dtype=float)[..., None]
    return (1 - _XI + (2 * _XI - 1) * xi) * (1 - _ETA + (2 * _ETA - 1) * eta)


# cell kinds: 0 bilinear, 1 two P1 triangles split along the 0-2 diagonal,
# 2 two P1 triangles split along the 1-3 diagonal
_TRIANGLES = {1: ((0, 1, 2), (0, 2, 3)), 2: ((0, 1, 3), (1, 2, 3))}


def cell_shape(kind, xi, eta):
    """Shape functions of a cell of the given kind at scalar ``(xi, eta)``."""
    N = np.zeros(4)
    if kind == 0:
        N[:] = q1_shape(xi, eta)
    elif kind == 1:
        if xi >= eta:
            N[0], N[1], N[2] = 1.0 - xi, xi - eta, eta
        else:
            N[0], N[2], N[3] = 1.0 - eta, xi, eta - xi
    else:
        if xi + eta <= 1.0:
            N[0], N[1], N[3] = 1.0 - xi - eta, xi, eta
        else:
            N[1], N[2], N[3] = 1.0 - eta, xi + eta - 1.0, 1.0 - xi
    return N


def _split_templates(kind, hr, hz):
    Ka = np.zeros((4, 4))
    Kb = np.zeros((4, 4))
    ma = np.zeros(4)
    mb = np.zeros(4)
    P = np.column_stack([_XI * hr, _ETA * hz])
    for tri in _TRIANGLES[kind]:
        tri = list(tri)
        X = P[tri]
        area = 0.5 * abs((X[1, 0] - X[0, 0]) * (X[2, 1] - X[0, 1]) - (X[2, 0] - X[0, 0]) * (X[1, 1] - X[0, 1]))
        # gradients of the barycentric coordinates
        T = np.array([[X[1, 0] - X[0, 0], X[2, 0] - X[0, 0]], [X[1, 1] - X[0, 1], X[2, 1] - X[0, 1]]])
        Ginv = np.linalg.inv(T)
        grads = np.vstack([-Ginv.sum(axis=0), Ginv[0], Ginv[1]])
        G = grads @ grads.T
        xi_c = _XI[tri].mean()
        for a in range(3):
            for b in range(3):
                Ka[tri[a], tri[b]] += G[a, b] * area
                Kb[tri[a], tri[b]] += G[a, b] * area * xi_c
            # int phi_a r = area/12 (r_a + sum r_k), r = r0 + hr*xi
            ma[tri[a]] += area / 3.0
            mb[tri[a]] += area / 12.0 * (_XI[tri[a]] + _XI[tri].sum())
    return Ka, Kb, ma, mb


def element_templates(hr: float, hz: float):
    """Return ``(Ka, Kb, ma, mb)`` such that on an element whose left edge sits
    at radius ``r0`` the r-weighted stiffness is ``r0*Ka + hr*Kb`` and the
    lumped r-weighted mass is ``r0*ma + hr*mb``.  2x2 Gauss is exact here."""
    g = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    Ka = np.zeros((4, 4))
    Kb = np.zeros((4, 4))
    for xi in g:
        for eta in g:
            dxi = (2 * _XI - 1) * (1 - _ETA + (2 * _ETA - 1) * eta)
            deta = (1 - _XI + (2 * _XI - 1) * xi) * (2 * _ETA - 1)
            local = (np.outer(dxi, dxi) * (hz / hr) + np.outer(deta, deta) * (hr / hz)) * 0.25
            Ka += local
            Kb += local * xi
    ma = np.full(4, 0.25 * hr * hz)
    mb = hr * hz * np.array([1.0 / 12, 1.0 / 6, 1.0 / 6, 1.0 / 12])
    return Ka, Kb, ma, mb


def all_templates(hr: float, hz: float):
    """Stacked ``(3, ...)`` templates indexed by cell kind."""
    parts = [element_templates(hr, hz), _split_templates(1, hr, hz), _split_templates(2, hr, hz)]
    return tuple(np.stack([p[i] for p in parts]) for i in range(4))


# ---------------------------------------------------------------- element loop

@njit(cache=True)
def _element_coo_nb(index, kind, r0, hr, Ka, Kb, ma, mb, rows, cols, vals, mass):
    nr_el = index.shape[0] - 1
    nz_el = index.shape[1] - 1
    loc = np.empty(4, dtype=np.int64)
    k = 0
    for i in range(nr_el):
        for j in range(nz_el):
            c = kind[i, j]
            loc[0] = index[i, j]
            loc[1] = index[i + 1, j]
            loc[2] = index[i + 1, j + 1]
            loc[3] = index[i, j + 1]
            for a in range(4):
                ga = loc[a]
                if ga < 0:
                    continue
                mass[ga] += r0[i] * ma[c, a] + hr * mb[c, a]
                for b in range(4):
                    gb = loc[b]
                    if gb < 0:
                        continue
                    rows[k] = ga
                    cols[k] = gb
                    vals[k] = r0[i] * Ka[c, a, b] + hr * Kb[c, a, b]
                    k += 1
    return k


def _cell_nodes(index, ii, jj):
    return np.stack([index[ii, jj], index[ii + 1, jj], index[ii + 1, jj + 1], index[ii, jj + 1]], axis=1)


def _element_coo_np(index, kind, r0, hr, Ka, Kb, ma, mb):
    nr_el = index.shape[0] - 1
    nz_el = index.shape[1] - 1
    ii, jj = np.meshgrid(np.arange(nr_el), np.arange(nz_el), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    c = kind[ii, jj]
    loc = _cell_nodes(index, ii, jj)
    rr = r0[ii]
    n = int(index.max()) + 1
    mloc = rr[:, None] * ma[c] + hr * mb[c]
    keep = loc >= 0
    mass = np.zeros(n)
    # element-major order reproduces the loop kernel's accumulation exactly
    e, a = np.nonzero(keep)
    np.add.at(mass, loc[e, a], mloc[e, a])
    kloc = rr[:, None, None] * Ka[c] + hr * Kb[c]
    pair = keep[:, :, None] & keep[:, None, :]
    e, a, b = np.nonzero(pair)
    return loc[e, a], loc[e, b], kloc[e, a, b], mass


def element_coo(index, kind, r0, hr, hz):
    """COO triplets of the r-weighted stiffness and the lumped r-weighted mass.

    ``index`` is the ``(nr, nz)`` node -> unknown map (``-1`` for eliminated
    Dirichlet nodes), ``kind`` the ``(nr-1, nz-1)`` cell kinds and ``r0[i]``
    the radius of node column ``i``.
    """
    Ka, Kb, ma, mb = all_templates(hr, hz)
    index = np.ascontiguousarray(index, dtype=np.int64)
    kind = np.ascontiguousarray(kind, dtype=np.int64)
    r0 = np.ascontiguousarray(r0, dtype=float)
    if _BACKEND == "numba":
        n = int(index.max()) + 1
        cap = 16 * (index.shape[0] - 1) * (index.shape[1] - 1)
        rows = np.empty(cap, dtype=np.int64)
        cols = np.empty(cap, dtype=np.int64)
        vals = np.empty(cap)
        mass = np.zeros(n)
        k = _element_coo_nb(index, kind, r0, hr, Ka, Kb, ma, mb, rows, cols, vals, mass)
        return rows[:k], cols[:k], vals[:k], mass
    return _element_coo_np(index, kind, r0, hr, Ka, Kb, ma, mb)


# ---------------------------------------------------------------- line measure

@njit(cache=True)
def _shape_nb(kind, x, y, N):
    N[0] = 0.0
    N[1] = 0.0
    N[2] = 0.0
    N[3] = 0.0
    if kind == 0:
        N[0] = (1.0 - x) * (1.0 - y)
        N[1] = x * (1.0 - y)
        N[2] = x * y
        N[3] = (1.0 - x) * y
    elif kind == 1:
        if x >= y:
            N[0] = 1.0 - x
            N[1] = x - y
            N[2] = y
        else:
            N[0] = 1.0 - y
            N[2] = x
            N[3] = y - x
    else:
        if x + y <= 1.0:
            N[0] = 1.0 - x - y
            N[1] = x
            N[3] = y
        else:
            N[1] = 1.0 - y
            N[2] = x + y - 1.0
            N[3] = 1.0 - x


@njit(cache=True)
def _segment_coo_nb(index, kind, ei, ej, xi, eta, w, rows, cols, vals):
    nseg = ei.shape[0]
    nq = xi.shape[1]
    loc = np.empty(4, dtype=np.int64)
    N = np.empty((nq, 4))
    Nq = np.empty(4)
    k = 0
    for m in range(nseg):
        i = ei[m]
        j = ej[m]
        c = kind[i, j]
        loc[0] = index[i, j]
        loc[1] = index[i + 1, j]
        loc[2] = index[i + 1, j + 1]
        loc[3] = index[i, j + 1]
        for q in range(nq):
            _shape_nb(c, xi[m, q], eta[m, q], Nq)
            for a in range(4):
                N[q, a] = Nq[a]
        for a in range(4):
            if loc[a] < 0:
                continue
            for b in range(4):
                if loc[b] < 0:
                    continue
                acc = 0.0
                for q in range(nq):
                    acc += w[m, q] * (N[q, a] * N[q, b])
                rows[k] = loc[a]
                cols[k] = loc[b]
                vals[k] = acc
                k += 1
    return k


def _shape_np(kind, xi, eta):
    """Vectorized :func:`cell_shape`; ``kind`` broadcasts against ``xi``."""
    kind = np.broadcast_to(kind, xi.shape)
    N = np.zeros(xi.shape + (4,))
    q = kind == 0
    N[q] = q1_shape(xi[q], eta[q])
    for c, lower, upper in (
        (1, lambda x, y: x >= y, None),
        (2, lambda x, y: x + y <= 1.0, None),
    ):
        sel = kind == c
        x, y = xi[sel], eta[sel]
        lo = lower(x, y)
        out = np.zeros(x.shape + (4,))
        if c == 1:
            out[lo, 0] = 1.0 - x[lo]
            out[lo, 1] = x[lo] - y[lo]
            out[lo, 2] = y[lo]
            hi = ~lo
            out[hi, 0] = 1.0 - y[hi]
            out[hi, 2] = x[hi]
            out[hi, 3] = y[hi] - x[hi]
        else:
            out[lo, 0] = 1.0 - x[lo] - y[lo]
            out[lo, 1] = x[lo]
            out[lo, 3] = y[lo]
            hi = ~lo
            out[hi, 1] = 1.0 - y[hi]
            out[hi, 2] = x[hi] + y[hi] - 1.0
            out[hi, 3] = 1.0 - x[hi]
        N[sel] = out
    return N


def _segment_coo_np(index, kind, ei, ej, xi, eta, w):
    loc = _cell_nodes(index, ei, ej)
    N = _shape_np(kind[ei, ej][:, None], xi, eta)  # (nseg, nq, 4)
    acc = np.zeros((len(ei), 4, 4))
    # sum over quadrature points in the same order as the loop kernel
    for q in range(xi.shape[1]):
        acc += w[:, q, None, None] * (N[:, q, :, None] * N[:, q, None, :])
    keep = loc >= 0
    pair = keep[:, :, None] & keep[:, None, :]
    e, a, b = np.nonzero(pair)
    return loc[e, a], loc[e, b], acc[e, a, b]


def segment_coo(index, kind, ei, ej, xi, eta, w):
    """COO triplets of ``sum_q w_q N_a N_b`` on every cut cell piece.

    ``ei, ej`` locate the cell, ``xi, eta`` (shape ``(nseg, nq)``) are local
    coordinates of the line quadrature points and ``w`` their weights, already
    multiplied by piece length and radius.
    """
    index = np.ascontiguousarray(index, dtype=np.int64)
    kind = np.ascontiguousarray(kind, dtype=np.int64)
    ei = np.ascontiguousarray(ei, dtype=np.int64)
    ej = np.ascontiguousarray(ej, dtype=np.int64)
    xi = np.ascontiguousarray(xi, dtype=float)
    eta = np.ascontiguousarray(eta, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    if _BACKEND == "numba":
        cap = 16 * len(ei)
        rows = np.empty(cap, dtype=np.int64)
        cols = np.empty(cap, dtype=np.int64)
        vals = np.empty(cap)
        k = _segment_coo_nb(index, kind, ei, ej, xi, eta, w, rows, cols, vals)
        return rows[:k], cols[:k], vals[:k]
    return _segment_coo_np(index, kind, ei, ej, xi, eta, w)
