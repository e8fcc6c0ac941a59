"""Quadrature helpers.

One-dimensional integrals go to QUADPACK (``scipy.integrate.quad``).  The
two-dimensional integrals of this package are over rectangles in ``(s, t)``
whose integrands are smooth on a known set of panels, so a composite
Gauss-Legendre tensor rule with an order-doubling error estimate is enough.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import NumericalFailure

EPSABS = 1e-12
EPSREL = 1e-10


def quad1d(f: Callable, a: float, b: float, points: Sequence[float] | None = None,
           epsabs: float = EPSABS, epsrel: float = EPSREL, limit: int = 400):
    """Adaptive Gauss-Kronrod integral of a scalar function on ``[a, b]``.

    Returns ``(value, error_estimate)``.  ``points`` are interior break
    points (support edges, kinks).  Raises :class:`NumericalFailure` when
    QUADPACK reports trouble and the error estimate misses the tolerance.
    """
    if b <= a:
        return 0.0, 0.0
    pts = None
    if points is not None:
        pts = sorted({float(p) for p in points if a < p < b}) or None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, points=pts, epsabs=epsabs, epsrel=epsrel, limit=limit)
    if caught and err > max(epsabs, epsrel * abs(val)) * 10:
        raise NumericalFailure(f"quad on [{a}, {b}] did not converge: value {val}, error {err:.2e}")
    return float(val), float(err)


@lru_cache(maxsize=32)
def _gl(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _panel_nodes(edges, order):
    x, w = _gl(order)
    edges = np.asarray(edges, dtype=float)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * x[None, :]).ravel()
    weights = (h[:, None] * w[None, :]).ravel()
    return nodes, weights


def tensor_rule(s_edges, t_edges, order: int):
    """Composite Gauss-Legendre tensor nodes and weights.

    Returns ``(S, T, W)`` as 2D arrays (``S`` varies along axis 0).
    """
    s, ws = _panel_nodes(s_edges, order)
    t, wt = _panel_nodes(t_edges, order)
    S, T = np.meshgrid(s, t, indexing="ij")
    return S, T, ws[:, None] * wt[None, :]


@dataclass(frozen=True)
class TensorResult:
    value: float
    error: float
    order: int


def tensor_integrate(f: Callable, s_edges, t_edges, order: int = 12, max_order: int = 96,
                     rtol: float = 1e-10, atol: float = 1e-14) -> TensorResult:
    """Integrate ``f(S, T)`` (vectorized) on a panelled rectangle.

    The per-panel order is doubled until two successive values agree to
    ``max(atol, rtol*|value|)``; the difference is the reported error.
    """
    def run(q):
        S, T, W = tensor_rule(s_edges, t_edges, q)
        return float(np.sum(W * f(S, T)))

    prev = run(order)
    q = order
    while True:
        q *= 2
        cur = run(q)
        err = abs(cur - prev)
        if err <= max(atol, rtol * abs(cur)):
            return TensorResult(cur, err, q)
        if q >= max_order:
            raise NumericalFailure(f"tensor quadrature stalled at order {q}: error {err:.2e}")
        prev = cur


def graded_edges(a: float, b: float, breaks: Sequence[float] = (), panels: int = 8) -> np.ndarray:
    """Panel edges on ``[a, b]``: the breaks plus ``panels`` equal pieces per gap."""
    knots = sorted({a, b, *[float(x) for x in breaks if a < x < b]})
    out = [a]
    for lo, hi in zip(knots[:-1], knots[1:]):
        out.extend(np.linspace(lo, hi, panels + 1)[1:].tolist())
    return np.asarray(out)
