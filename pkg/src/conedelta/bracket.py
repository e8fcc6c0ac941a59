"""Neumann bracketing lower bounds for the bottom of the essential spectrum.

The 1D comparison operator is ``-d^2/dt^2 - beta delta_0`` on ``(-L/2, L/2)``
with Neumann ends.  Its ground state is ``cosh(kappa (L/2 - |t|))`` with
``2 kappa tanh(kappa L / 2) = beta`` and energy ``-kappa^2``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import InvalidInput, NumericalFailure
from .geometry import ConeModel, weight_r


@dataclass(frozen=True)
class MuResult:
    beta: float
    length_L: float
    kappa: float
    mu: float
    gap: float  # -(mu + beta^2/4) > 0, computed without cancellation
    iterations: int
    residual: float

    def to_dict(self):
        return asdict(self)


def _excess_eq(delta, beta, L):
    # kappa = beta/2 + delta solves 2 kappa tanh(kappa L/2) = beta  iff
    # delta = (beta + 2 delta) e / (1 + e),  e = exp(-kappa L)
    e = math.exp(-(0.5 * beta + delta) * L)
    return delta - (beta + 2.0 * delta) * e / (1.0 + e)


def _excess_deriv(delta, beta, L):
    e = math.exp(-(0.5 * beta + delta) * L)
    q = e / (1.0 + e)
    return 1.0 - 2.0 * q + (beta + 2.0 * delta) * L * q / (1.0 + e)


def mu_neumann_delta(beta: float, L: float, tol: float = 1e-15, max_iter: int = 400) -> MuResult:
    """Ground state energy of the Neumann interval with a central delta well.

    Solves for the excess ``delta = kappa - beta/2 > 0`` (bisection, then
    Newton), so the spectral gap ``-(mu + beta^2/4) = delta (beta + delta)``
    stays accurate even when it is far below machine epsilon relative to mu.
    """
    if not (beta > 0 and L > 0 and math.isfinite(beta) and math.isfinite(L)):
        raise InvalidInput(f"need beta > 0 and L > 0, got beta={beta!r}, L={L!r}")
    lo, hi = 0.0, beta
    it = 0
    while _excess_eq(hi, beta, L) <= 0.0:
        hi *= 2.0
        it += 1
        if it > 200:
            raise NumericalFailure("could not bracket the Neumann delta root")
    # bisection to a coarse bracket, then Newton
    while hi - lo > 1e-6 * hi and it < max_iter:
        mid = 0.5 * (lo + hi)
        if _excess_eq(mid, beta, L) > 0.0:
            hi = mid
        else:
            lo = mid
        it += 1
    delta = 0.5 * (lo + hi)
    for _ in range(50):
        step = _excess_eq(delta, beta, L) / _excess_deriv(delta, beta, L)
        new = delta - step
        if not (lo <= new <= hi):
            new = 0.5 * (lo + hi)
        if _excess_eq(new, beta, L) > 0.0:
            hi = new
        else:
            lo = new
        it += 1
        if abs(new - delta) <= tol * max(new, 1e-300):
            delta = new
            break
        delta = new
    kappa = 0.5 * beta + delta
    residual = abs(2.0 * kappa * math.tanh(0.5 * kappa * L) - beta)
    if residual > 1e-12 * max(1.0, beta):
        raise NumericalFailure(f"Neumann delta root residual {residual:.3e} too large")
    return MuResult(beta, L, kappa, -kappa * kappa, delta * (beta + delta), it, residual)


def mu_dense_oracle(beta: float, L: float, n_elem: int = 4000, levels: int = 3) -> float:
    """Independent check of :func:`mu_neumann_delta` by discretization.

    Linear elements with lumped mass on ``(-L/2, L/2)``, Neumann ends, the
    delta as ``-beta`` on the central node (``-beta/h`` after mass scaling),
    Richardson-extrapolated over ``levels`` halvings of ``h``.
    """
    if n_elem % 2:
        raise InvalidInput("n_elem must be even so the delta sits on a node")
    vals = []
    for lev in range(levels):
        N = n_elem * 2 ** lev
        h = L / N
        m = np.full(N + 1, h)
        m[[0, -1]] = 0.5 * h
        k = np.full(N + 1, 2.0 / h)
        k[[0, -1]] = 1.0 / h
        k[N // 2] -= beta
        d = k / m
        e = (-1.0 / h) / np.sqrt(m[:-1] * m[1:])
        lam = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, 0))
        vals.append(float(lam[0]))
    # Richardson table for an h^2, h^4, ... expansion
    table = vals
    for j in range(1, levels):
        f = 4.0 ** j
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
    return table[0]


def ey02_fit(beta: float, L_list: Sequence[float]):
    """Fit ``gap(L) <= C beta^2 exp(-beta L / 4)`` and check it on larger ``L``.

    ``C`` is taken as the largest ratio ``gap / (beta^2 e^{-beta L/4})`` over
    the two smallest lengths; ``verified`` says the fitted law bounds the
    measured gap at every longer interval.  Returns ``(C_fit, verified)``.
    A gap below ``1e-14`` at the fitting points gives ``(0.0, True)``.
    """
    L = [float(x) for x in L_list]
    if len(L) < 3 or any(b <= a for a, b in zip(L, L[1:])):
        raise InvalidInput("L_list must be ascending with at least three entries")
    gaps = np.array([mu_neumann_delta(beta, x).gap for x in L])
    law = beta * beta * np.exp(-beta * np.asarray(L) / 4.0)
    if gaps[:2].max() < 1e-14:
        return 0.0, True
    C = float(np.max(gaps[:2] / law[:2]))
    verified = bool(np.all(gaps[2:] <= C * law[2:]))
    return C, verified


def observed_decay_rate(beta: float, L_list: Sequence[float]) -> float:
    """Exponential decay rate of the gap between the two largest lengths."""
    L = sorted(float(x) for x in L_list)
    g1 = mu_neumann_delta(beta, L[-2]).gap
    g2 = mu_neumann_delta(beta, L[-1]).gap
    return math.log(g1 / g2) / (L[-1] - L[-2])


@dataclass(frozen=True)
class ThresholdBound:
    n: float
    c_n: float
    mu_val: float
    correction: float
    bound: float
    threshold: float

    def to_dict(self):
        return asdict(self)


def threshold_lower_bound(n: float, model: ConeModel) -> ThresholdBound:
    """Lower estimate of the bottom of the essential spectrum from the strip
    ``s > n, |t| < sqrt(n)``.

    The ratio ``r(s, 0) / r(s, -sqrt n)`` is decreasing in ``s``, so its
    supremum is attained at ``s = n``; it both strengthens the delta well and
    rescales the energy.
    """
    th = model.theta
    root = math.sqrt(n)
    r_in = float(weight_r(n, -root, th))
    if not r_in > 0:
        raise InvalidInput(f"n={n!r} too small: the strip |t| < sqrt(n) reaches the axis")
    c_n = float(weight_r(n, 0.0, th)) / r_in
    mu = mu_neumann_delta(model.alpha * c_n, 2.0 * root)
    return ThresholdBound(float(n), c_n, mu.mu, c_n, c_n * mu.mu, model.threshold)


def threshold_sweep(n_list: Iterable[float], model: ConeModel):
    return [threshold_lower_bound(n, model) for n in n_list]


def global_lower_bound(model: ConeModel) -> float:
    """``-alpha^2 / (4 sin^2 theta)``, a lower bound for the whole operator.

    Each vertical line ``r = const`` meets the cone once, where the surface
    measure is ``1/sin(theta)`` times the line element; dropping the radial
    derivative leaves a line delta of strength ``alpha / sin(theta)``, whose
    infinite-interval ground state energy is the stated value.
    """
    s = math.sin(model.theta)
    return -(model.alpha / s) ** 2 / 4.0


def bracketing_consistency(eig_report, bound: float | None = None, tol: float = 1e-8,
                           model: ConeModel | None = None) -> bool:
    """True iff every computed eigenvalue is ``>= bound - tol``.

    ``eig_report`` is an ``EigReport`` or a sequence of eigenvalues.  Without
    ``bound`` the global lower bound of ``model`` is used.
    """
    lam = getattr(eig_report, "eigenvalues", eig_report)
    lam = np.asarray(lam, dtype=float)
    if bound is None:
        if model is None:
            raise InvalidInput("need either bound or model")
        bound = global_lower_bound(model)
    return bool(np.all(lam >= bound - tol))
