"""Separable trial functions in ray coordinates and the eigenvalue certificate.

A trial function is ``omega(s, t) = A(s) P(s) B(t)`` with a real amplitude
``A``, a phase ``P = exp(i p s)`` and a transverse factor
``B(t) = chi2(t / w) exp(-alpha |t| / 2)``.  Its reduced form is

    q[omega] = ||grad omega||^2 - int |omega|^2 / (4 r^2) - alpha int |omega(s, 0)|^2 ds,

which is the energy of the axisymmetric function ``omega / sqrt(2 pi r)``.
Two families are provided: ``essential`` (support ``s in [n, 2n]``, width
``w = n``, phase ``p``) and ``discrete`` (support ``s in [n, n + n^2]``,
width ``w = sqrt(n)``, no phase).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammainc

from .errors import InvalidInput, NumericalFailure
from .geometry import ConeModel
from .profiles import SmoothProfile, hardy_check, make_bump, make_hardy_poly, make_plateau
from .quadrature import EPSREL, graded_edges, quad1d, tensor_integrate

FAMILIES = ("essential", "discrete")


def default_eps(theta: float) -> float:
    """Plateau half-width ``min(0.5, tan(theta)/2)``."""
    return min(0.5, 0.5 * math.tan(theta))


# ----------------------------------------------------------- evaluation core

def tensor_axes(s, t):
    """``(s[:, :1], t[:1, :])`` when ``(s, t)`` is an ``ij`` meshgrid, else ``(s, t)``.

    Products of the returned columns and rows broadcast back to the grid.
    """
    if (s.ndim == 2 and s.shape == t.shape and s.size
            and np.array_equal(s, np.broadcast_to(s[:, :1], s.shape))
            and np.array_equal(t, np.broadcast_to(t[:1, :], t.shape))):
        return s[:, :1], t[:1, :]
    return s, t


class SeparableFunction:
    """``A(s) exp(i p s) B(t)`` with callables for ``A, A', A''`` and ``B, B', B''``.

    ``B'`` and ``B''`` take a ``side`` array (+1 / -1) so one-sided limits at
    ``t = 0`` can be formed.  ``s_edges`` / ``t_edges`` are quadrature panel
    edges covering the support, with every kink on an edge.
    """

    def __init__(self, model: ConeModel, A, dA, d2A, B, dB, d2B, s_edges, t_edges, p: float = 0.0):
        self.model = model
        self.A, self.dA, self.d2A = A, dA, d2A
        self.B, self.dB, self.d2B = B, dB, d2B
        self.s_edges = np.asarray(s_edges, dtype=float)
        self.t_edges = np.asarray(t_edges, dtype=float)
        self.p = float(p)
        rmin = self.min_radius()
        if not rmin > 0:
            raise InvalidInput(f"support reaches the axis (min r = {rmin:.3g})")

    @property
    def s_support(self):
        return (float(self.s_edges[0]), float(self.s_edges[-1]))

    @property
    def t_support(self):
        return (float(self.t_edges[0]), float(self.t_edges[-1]))

    def min_radius(self) -> float:
        th = self.model.theta
        s0, _ = self.s_support
        t0, _ = self.t_support
        return s0 * math.sin(th) + t0 * math.cos(th)

    def radius(self, s, t):
        th = self.model.theta
        return s * math.sin(th) + t * math.cos(th)

    def fields(self, s, t, side=None):
        """Real and imaginary parts of ``omega``, ``omega_s``, ``omega_t``.

        Each is returned with a leading axis of length 2.
        """
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if side is None:
            # separable: on a tensor grid evaluate each factor on its own axis
            s, t = tensor_axes(s, t)
            side = np.sign(t)
        a, da = self.A(s), self.dA(s)
        b, db = self.B(t), self.dB(t, side)
        c, sn = np.cos(self.p * s), np.sin(self.p * s)
        val = np.stack([a * c * b, a * sn * b])
        ds = np.stack([(da * c - self.p * a * sn) * b, (da * sn + self.p * a * c) * b])
        dt = np.stack([a * c * db, a * sn * db])
        return val, ds, dt

    def integrate(self, f: Callable, rtol: float = 1e-11):
        return tensor_integrate(f, self.s_edges, self.t_edges, rtol=rtol)

    def integrate_trace(self, f: Callable, order: int = 12, rtol: float = 1e-12) -> float:
        """Composite Gauss rule along ``t = 0`` with order doubling."""
        x, w = np.polynomial.legendre.leggauss(order)
        prev = None
        q = order
        while True:
            x, w = np.polynomial.legendre.leggauss(q)
            e = self.s_edges
            h = np.diff(e)
            S = (e[:-1, None] + h[:, None] * 0.5 * (x + 1.0)).ravel()
            W = (h[:, None] * 0.5 * w).ravel()
            cur = float(np.sum(W * f(S)))
            if prev is not None and abs(cur - prev) <= max(1e-15, rtol * abs(cur)):
                return cur
            if q >= 192:
                raise NumericalFailure("trace quadrature did not converge")
            prev = cur
            q *= 2


def _transverse(chi2: SmoothProfile, width: float, alpha: float):
    """``B(t) = chi2(t/width) exp(-alpha|t|/2)`` with one-sided derivatives."""
    def B(t):
        return chi2.eval(t / width) * np.exp(-0.5 * alpha * np.abs(t))

    def dB(t, side):
        e = np.exp(-0.5 * alpha * np.abs(t))
        return (chi2.d1(t / width) / width - 0.5 * alpha * side * chi2.eval(t / width)) * e

    def d2B(t, side):
        e = np.exp(-0.5 * alpha * np.abs(t))
        x = t / width
        return (chi2.d2(x) / width**2 - alpha * side * chi2.d1(x) / width
                + 0.25 * alpha**2 * chi2.eval(x)) * e

    return B, dB, d2B


def _t_edges(half: float, alpha: float) -> np.ndarray:
    """Panels on ``[-half, half]`` with breaks at 0, +-half/2 and width <= 1/alpha."""
    panels = max(2, int(math.ceil(0.5 * half * alpha)))
    right = graded_edges(0.0, half, [0.5 * half], panels)
    return np.concatenate([-right[::-1], right[1:]])


# --------------------------------------------------------------- the families

@dataclass(frozen=True)
class TrialFunction:
    """A member of the ``essential`` or ``discrete`` trial family.

    Parameters
    ----------
    n : float
        Family index (``>= 1``).
    family : {"essential", "discrete"}
    chi1, chi2 : SmoothProfile
        Longitudinal profile (a bump on ``(1, 2)`` for ``essential``, a
        profile on ``[0, 1]`` for ``discrete``) and transverse plateau.
    model : ConeModel
    p : float
        Longitudinal wavenumber, ``essential`` family only.
    """

    n: float
    family: str
    chi1: SmoothProfile
    chi2: SmoothProfile
    model: ConeModel
    p: float = 0.0
    _fn: SeparableFunction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInput(f"family must be one of {FAMILIES}, got {self.family!r}")
        if not self.n >= 1:
            raise InvalidInput(f"n must be >= 1, got {self.n!r}")
        if self.family == "discrete" and self.p != 0.0:
            raise InvalidInput("the discrete family carries no phase")
        eps = self.eps
        if not 0 < eps < math.tan(self.model.theta):
            raise InvalidInput(f"plateau width eps={eps!r} must lie in (0, tan(theta))")
        object.__setattr__(self, "_fn", self._build())

    @property
    def eps(self) -> float:
        return float(self.chi2.params.get("eps", self.chi2.support[1]))

    @property
    def width(self) -> float:
        return float(self.n) if self.family == "essential" else math.sqrt(self.n)

    @property
    def s_support(self):
        n = float(self.n)
        return (n, 2.0 * n) if self.family == "essential" else (n, n + n * n)

    @property
    def t_support(self):
        h = self.eps * self.width
        return (-h, h)

    def _build(self) -> SeparableFunction:
        n = float(self.n)
        al = self.model.alpha
        B, dB, d2B = _transverse(self.chi2, self.width, al)
        c1 = self.chi1
        if self.family == "essential":
            k = n ** -0.5

            def A(s):
                return k * c1.eval(s / n)

            def dA(s):
                return k * c1.d1(s / n) / n

            def d2A(s):
                return k * c1.d2(s / n) / n**2

            s_edges = graded_edges(n, 2.0 * n, (), 8)
        else:
            def A(s):
                return c1.eval((s - n) / n**2) / n

            def dA(s):
                return c1.d1((s - n) / n**2) / n**3

            def d2A(s):
                return c1.d2((s - n) / n**2) / n**5

            s_edges = n + n * n * _u_edges(n)
        return SeparableFunction(self.model, A, dA, d2A, B, dB, d2B, s_edges,
                                 _t_edges(self.eps * self.width, al), self.p)

    # delegate evaluation
    def fields(self, s, t, side=None):
        return self._fn.fields(s, t, side)

    @property
    def function(self) -> SeparableFunction:
        return self._fn

    @property
    def rho(self) -> float:
        """Distance from the axis to the support."""
        return self._fn.min_radius()

    def describe(self) -> dict:
        return {"n": self.n, "family": self.family, "p": self.p, "eps": self.eps,
                "s_support": list(self.s_support), "t_support": list(self.t_support),
                "chi1": self.chi1.describe(), "chi2": self.chi2.describe()}


def _u_edges(n: float, levels: int = 60) -> np.ndarray:
    """Edges on ``[0, 1]``: geometric towards 0 (where ``chi1 ~ u^b``) plus uniform."""
    geo = [2.0 ** -k for k in range(levels, 0, -1)]
    return np.unique(np.concatenate([[0.0], geo, np.linspace(0.5, 1.0, 5)]))


def essential_member(n: float, p: float, model: ConeModel, eps: float | None = None) -> TrialFunction:
    eps = default_eps(model.theta) if eps is None else eps
    return TrialFunction(n, "essential", make_bump(1.0, 2.0), make_plateau(eps), model, p)


def discrete_member(n: float, model: ConeModel, chi1: SmoothProfile, eps: float | None = None) -> TrialFunction:
    eps = default_eps(model.theta) if eps is None else eps
    return TrialFunction(n, "discrete", chi1, make_plateau(eps), model)


def _as_function(omega) -> SeparableFunction:
    return omega.function if isinstance(omega, TrialFunction) else omega


# ---------------------------------------------------------- form evaluators

@dataclass(frozen=True)
class FormTerms:
    norm_sq: float
    grad_sq: float
    sing: float
    trace: float
    error: float

    @property
    def value(self) -> float:
        return self.grad_sq - self.sing - self.trace


def form_terms(omega) -> FormTerms:
    """All pieces of the reduced form by 2D quadrature in ``(s, t)``."""
    f = _as_function(omega)
    al = f.model.alpha

    def dens(key):
        def g(S, T):
            val, ds, dt = f.fields(S, T)
            if key == "norm":
                return np.sum(val**2, axis=0)
            if key == "grad":
                return np.sum(ds**2 + dt**2, axis=0)
            r = f.radius(S, T)
            return np.sum(val**2, axis=0) / (4.0 * r * r)
        return g

    norm = f.integrate(dens("norm"))
    grad = f.integrate(dens("grad"))
    sing = f.integrate(dens("sing"))
    trace = al * f.integrate_trace(lambda S: np.sum(f.fields(S, np.zeros_like(S), np.ones_like(S))[0] ** 2, axis=0))
    return FormTerms(norm.value, grad.value, sing.value, trace, norm.error + grad.error + sing.error)


def reduced_form_value(omega) -> float:
    """``||grad omega||^2 - int |omega|^2/(4r^2) - alpha int_ray |omega|^2``."""
    return form_terms(omega).value


def weighted_3d_form_value(omega) -> float:
    """Form of ``psi = omega / sqrt(2 pi r)`` computed in meridian variables.

    ``int (psi_r^2 + psi_z^2) 2 pi r dr dz - alpha int_ray psi^2 2 pi r dl``
    with the derivatives of ``psi`` formed by the chain rule; the map
    ``(s, t) -> (r, z)`` is a rotation, so its Jacobian is one.
    """
    f = _as_function(omega)
    th = f.model.theta
    st, ct = math.sin(th), math.cos(th)
    two_pi = 2.0 * math.pi

    def dens(S, T):
        val, ws, wt = f.fields(S, T)
        r = f.radius(S, T)
        w_r = ws * st + wt * ct
        w_z = ws * ct - wt * st
        k = (two_pi * r) ** -0.5
        psi_r = w_r * k - 0.5 * val * k / r
        psi_z = w_z * k
        return np.sum(psi_r**2 + psi_z**2, axis=0) * two_pi * r

    def trace(S):
        val = f.fields(S, np.zeros_like(S), np.ones_like(S))[0]
        r = S * st
        return np.sum(val**2 / (two_pi * r), axis=0) * two_pi * r

    kin = f.integrate(dens).value
    return kin - f.model.alpha * f.integrate_trace(trace)


def rayleigh_quotient(omega, model: ConeModel | None = None) -> float:
    """``q[omega] / ||omega||^2``, an upper bound for the lowest eigenvalue."""
    t = form_terms(omega)
    if not t.norm_sq > 0:
        raise InvalidInput("zero trial function")
    return t.value / t.norm_sq


def rayleigh_excess(omega: TrialFunction) -> float:
    """``rayleigh_quotient + alpha^2/4`` without cancellation.

    For the discrete family this is ``S_n / ||omega||^2`` from
    :func:`compute_sn`; otherwise the 2D quadrature value.
    """
    if isinstance(omega, TrialFunction) and omega.family == "discrete":
        rep = compute_sn(omega.n, omega.model, omega.chi1, omega.chi2)
        return rep.s_n / (rep.norm_term / (0.25 * omega.model.alpha ** 2))
    t = form_terms(omega)
    return t.value / t.norm_sq + 0.25 * _as_function(omega).model.alpha ** 2


# ------------------------------------------------------- random test functions

def random_test_function(model: ConeModel, rng: np.random.Generator) -> SeparableFunction:
    """A random smooth compactly supported function off the axis.

    The amplitude is a bump times a random trigonometric factor; the
    transverse factor is a plateau, optionally shifted off the ray so the
    trace term can vanish, times ``exp(-alpha|t|/2)`` and a random linear
    factor.  Support stays at radius ``>= 0.5``.
    """
    th = model.theta
    al = model.alpha
    s0 = rng.uniform(2.0, 6.0)
    length = rng.uniform(1.0, 4.0)
    bump = make_bump(s0, s0 + length)
    k, c1, ph = rng.uniform(0.0, 3.0), rng.uniform(-0.5, 0.5), rng.uniform(0, 2 * math.pi)
    w = rng.uniform(0.3, 1.0) * min(1.0, s0 * math.tan(th) * 0.8)
    shift = rng.choice([0.0, 0.0, 0.0, 2.5 * w])
    plat = make_plateau(w)
    c2 = rng.uniform(-0.3, 0.3) / w

    def A(s):
        return bump.eval(s) * (1.0 + c1 * np.sin(k * s + ph))

    def dA(s):
        return bump.d1(s) * (1.0 + c1 * np.sin(k * s + ph)) + bump.eval(s) * c1 * k * np.cos(k * s + ph)

    def d2A(s):
        g = 1.0 + c1 * np.sin(k * s + ph)
        return (bump.d2(s) * g + 2.0 * bump.d1(s) * c1 * k * np.cos(k * s + ph)
                - bump.eval(s) * c1 * k * k * np.sin(k * s + ph))

    def B(t):
        x = t - shift
        return plat.eval(x) * np.exp(-0.5 * al * np.abs(t)) * (1.0 + c2 * x)

    def dB(t, side):
        x = t - shift
        e = np.exp(-0.5 * al * np.abs(t))
        g = 1.0 + c2 * x
        return (plat.d1(x) * g + plat.eval(x) * c2 - 0.5 * al * side * plat.eval(x) * g) * e

    def d2B(t, side):  # not needed by the form evaluators
        raise NotImplementedError

    s_edges = graded_edges(s0, s0 + length, (), 8)
    t_edges = np.unique(np.concatenate([shift + w * np.array([-1.0, -0.5, 0.0, 0.5, 1.0]),
                                        [0.0] if abs(shift) < w else []]))
    t_edges = t_edges[(t_edges >= shift - w) & (t_edges <= shift + w)]
    fn = SeparableFunction(model, A, dA, d2A, B, dB, d2B, s_edges, t_edges)
    # refine panels between the given breaks
    fn.t_edges = graded_edges(fn.t_edges[0], fn.t_edges[-1], fn.t_edges[1:-1], 4)
    return fn


# ------------------------------------------------------------------- S_n

@dataclass(frozen=True)
class SnReport:
    """Terms of ``S_n = q[omega_n] + (alpha^2/4) ||omega_n||^2``.

    ``s_n`` is evaluated in a cancellation-free arrangement; the signed sum
    of the four stored terms reproduces it up to the rounding of the terms.
    """

    n: float
    grad_term: float
    sing_term: float
    i_n: float
    j_n: float
    trace_term: float
    norm_term: float
    s_n: float
    s_n_scaled: float
    error_scaled: float
    method: str

    @property
    def term_sum(self) -> float:
        return self.grad_term - self.sing_term - self.trace_term + self.norm_term

    def to_dict(self):
        d = asdict(self)
        d["term_sum"] = self.term_sum
        return d


def _plateau_moment(k: int, chi2: SmoothProfile, w: float, alpha: float, which: str = "B2"):
    """``int t^k B(t)^2 dt`` (``which='B2'``) or ``int chi2'(t/w)^2 e^{-alpha|t|} dt / w^2``
    (``which='Q'``) for even ``k`` and ``B = chi2(t/w) e^{-alpha|t|/2}``.

    On the plateau ``|t| <= eps w / 2`` the first integral is an incomplete
    gamma function; the transition layer is integrated in ``x = t/w``.
    Returns ``(value, error)``.
    """
    eps = chi2.params["eps"]
    a = 0.5 * eps * w
    if which == "B2":
        core = 2.0 * math.gamma(k + 1) / alpha ** (k + 1) * float(gammainc(k + 1, alpha * a))

        def g(x):
            return w ** (k + 1) * x**k * float(chi2.eval(x)) ** 2 * math.exp(-alpha * w * x)
    else:
        core = 0.0

        def g(x):
            return w ** (k - 1) * x**k * float(chi2.d1(x)) ** 2 * math.exp(-alpha * w * x)
    layer, err = quad1d(g, 0.5 * eps, eps)
    return core + 2.0 * layer, 2.0 * err


def _decades(d: float):
    """Break points ``d, 10 d, 100 d, ... < 1/2`` resolving the scale ``u ~ d``."""
    out = []
    x = d
    # stop short of 1: a rounded 10^k d just below 1 leaves a sliver panel
    while x < 0.5:
        out.append(x)
        x *= 10.0
    return out


def _inv_moment(chi1: SmoothProfile, n: float, k: int):
    """``int_0^1 chi1(u)^2 / (u + 1/n)^k du`` with its error estimate."""
    d = 1.0 / n

    def g(u):
        return float(chi1.eval(u)) ** 2 / (u + d) ** k

    return quad1d(g, 0.0, 1.0, points=_decades(d), epsabs=0.0)


N_MAX = 1e75


def _inv_moment_scaled(chi1: SmoothProfile, n: float, k: int):
    """``int_0^1 chi1(u)^2 / (1 + n u)^k du``; bounded integrand for any ``n``."""
    def g(u):
        return float(chi1.eval(u)) ** 2 * math.exp(-k * math.log1p(n * u))

    return quad1d(g, 0.0, 1.0, points=_decades(1.0 / n), epsabs=0.0)


def compute_sn(n: float, model: ConeModel, chi1: SmoothProfile, chi2: SmoothProfile | None = None,
               method: str = "auto") -> SnReport:
    """Evaluate the pieces of ``S_n`` for the discrete family.

    The one-dimensional factors (norms of ``chi1``, the transverse integrals)
    are computed by 1D quadrature; ``I_n`` (the singular term with ``r``
    frozen on the ray) is a 1D integral; ``J_n`` (the remainder) uses 2D
    quadrature when ``method='quadrature'`` and a convergent expansion in
    ``t cos(theta) / r`` when ``method='expansion'``.  ``'auto'`` switches at
    ``n = 1000``.

    With ``T0 = int B^2`` and ``Q = int chi2'(t/sqrt n)^2 e^{-alpha|t|} / n``
    the ground-state identity ``int B'^2 = alpha - (alpha^2/4) T0 + Q`` turns
    the sum into ``S_n = ||chi1||^2 Q + (G/n^4) T0 - I_n - J_n`` with
    ``G = ||chi1'||^2``, which is what ``s_n`` holds.
    """
    th = model.theta
    al = model.alpha
    n = float(n)
    if chi2 is None:
        chi2 = make_plateau(default_eps(th))
    eps = chi2.params["eps"]
    w = math.sqrt(n)
    if not eps * w < n * math.tan(th):
        raise InvalidInput(f"n={n!r} too small: transverse support reaches the axis")
    if n > N_MAX:
        raise InvalidInput(f"n={n:.3g} exceeds {N_MAX:.0e}: n^4 leaves double precision")
    if method == "auto":
        method = "quadrature" if n <= 1e3 else "expansion"
    if method not in ("quadrature", "expansion"):
        raise InvalidInput(f"unknown method {method!r}")

    # chi1 integrals on (0, 1)
    if chi1.grad_sq is not None:
        G, gerr = chi1.grad_sq, 0.0
    else:
        G, gerr = quad1d(lambda u: float(chi1.d1(u)) ** 2, 0.0, 1.0)
    N1 = chi1.l2_norm_sq
    T0, t0err = _plateau_moment(0, chi2, w, al, "B2")
    Q, qerr = _plateau_moment(0, chi2, w, al, "Q")
    s2 = math.sin(th) ** 2
    I1, i1err = _inv_moment(chi1, n, 2)
    i_scaled = T0 * I1 / (4.0 * s2)
    i_err = (t0err * I1 + T0 * i1err) / (4.0 * s2)

    if method == "quadrature":
        j_scaled, j_err = _j_quadrature(n, model, chi1, chi2)
    else:
        j_scaled, j_err = _j_expansion(n, model, chi1, chi2)

    n4 = n**4
    q_scaled = N1 * Q * n4
    s_scaled = q_scaled + G * T0 - i_scaled - j_scaled
    err = n4 * N1 * qerr + gerr * T0 + G * t0err + i_err + j_err + 4 * EPSREL * abs(q_scaled)
    grad_term = (G / n4) * T0 + N1 * (al - 0.25 * al * al * T0 + Q)
    return SnReport(n, grad_term, (i_scaled + j_scaled) / n4, i_scaled / n4, j_scaled / n4, al * N1,
                    0.25 * al * al * N1 * T0, s_scaled / n4, s_scaled, err, method)


def _j_quadrature(n, model, chi1, chi2):
    """``n^4 J_n`` by 2D quadrature over ``(u, t)``."""
    th = model.theta
    st, ct = math.sin(th), math.cos(th)
    al = model.alpha
    w = math.sqrt(n)
    B, _, _ = _transverse(chi2, w, al)

    def f(U, T):
        r0 = (n + n * n * U) * st
        r = r0 + T * ct
        # n^4 (1/r^2 - 1/r0^2) = -n^4 t cos(theta) (r + r0) / (r^2 r0^2)
        diff = -T * ct * (r + r0) / (r * r * r0 * r0) * n**4
        return chi1.eval(U) ** 2 * B(T) ** 2 * 0.25 * diff

    res = tensor_integrate(f, _u_edges(n), _t_edges(chi2.params["eps"] * w, al), rtol=1e-10, atol=1e-16)
    return res.value, res.error


def _j_expansion(n, model, chi1, chi2):
    """``n^4 J_n`` from ``1/r^2 = r0^-2 sum (k+1)(-x)^k``, ``x = t cos(theta)/r0``.

    Odd powers integrate to zero against the even ``B^2``; the ``x^2`` and
    ``x^4`` terms are kept and the ``x^6`` tail bounds the error.
    """
    th = model.theta
    st, ct = math.sin(th), math.cos(th)
    al = model.alpha
    w = math.sqrt(n)
    xmax = chi2.params["eps"] * w * ct / (n * st)
    total, err = 0.0, 0.0
    for k, coef in ((2, 3.0), (4, 5.0), (6, 7.0)):
        M, merr = _plateau_moment(k, chi2, w, al, "B2")
        # n^4 int A^2 r0^-(k+2) ds = n^(2-k) sin^-(k+2) int chi1^2 (1 + n u)^-(k+2) du
        Jk, jerr = _inv_moment_scaled(chi1, n, k + 2)
        scale = 0.25 * coef * ct**k / st ** (k + 2) * n ** (2.0 - k)
        term = scale * M * Jk
        if k < 6:
            total += term
            err += abs(scale) * (merr * Jk + M * jerr)
        else:
            err += abs(term) / (1.0 - xmax * xmax) ** 2
    return total, err


def sn_limit(model: ConeModel, chi1: SmoothProfile) -> float:
    """``(2/alpha) (||chi1'||^2 - int chi1^2/u^2 / (4 sin^2 theta))``, negative when the Hardy check passes."""
    rep = hardy_check(chi1, model.theta)
    if not rep.satisfied:
        raise InvalidInput(f"Hardy condition fails for theta={model.theta!r}: margin {rep.margin:.3g}")
    return (2.0 / model.alpha) * (rep.grad_sq - rep.hardy_int * rep.bound)


# ------------------------------------------------------------------ certificate

@dataclass(frozen=True)
class Certificate:
    theta: float
    alpha: float
    chi1: dict
    limit_L: float
    safety: float
    gamma: float
    n_start: int
    n_seq: list
    bounds: list  # exact Fractions
    member_sn_scaled: list
    member_errors: list
    evaluations: int

    def bounds_float(self):
        return [float(b) for b in self.bounds]

    def to_dict(self):
        d = asdict(self)
        d["n_seq"] = [str(k) for k in self.n_seq]
        d["bounds"] = [str(b) for b in self.bounds]
        return d


def supports_disjoint(n_seq: Sequence[int]) -> bool:
    """Pairwise disjointness of the open intervals ``(n_k, n_k + n_k^2)``, exact integers."""
    iv = sorted((int(a), int(a) + int(a) ** 2) for a in n_seq)
    return all(hi <= lo for (_, hi), (lo, _) in zip(iv, iv[1:]))


def build_certificate(model: ConeModel, chi1: SmoothProfile, k_max: int = 4, safety: float = 0.5,
                      cap: float = 1e6, chi2: SmoothProfile | None = None, n_min: int = 2) -> Certificate:
    """Certified upper bounds ``lambda_k <= -alpha^2/4 - gamma / n_k^4``.

    ``gamma = -alpha L safety / 2``.  ``N`` is the smallest ``n`` (found by a
    doubling scan then integer bisection) with ``S_n n^4 <= L safety`` and a
    quadrature error below a tenth of ``|L safety|``.  Every member of
    ``n_{k+1} = n_k^2 + n_k`` is then verified the same way.  Bounds are
    exact rationals; in floating point ``gamma / n_k^4`` vanishes next to
    ``alpha^2/4`` already for ``k = 2``.
    """
    if k_max < 1:
        raise InvalidInput("k_max must be >= 1")
    if not 0 < safety < 1:
        raise InvalidInput("safety must lie in (0, 1)")
    L = sn_limit(model, chi1)
    target = L * safety
    gamma = -model.alpha * target / 2.0
    chi2 = chi2 if chi2 is not None else make_plateau(default_eps(model.theta))
    eps = chi2.params["eps"]
    evals = [0]

    def ok(n):
        evals[0] += 1
        rep = compute_sn(n, model, chi1, chi2)
        return rep.s_n_scaled <= target and rep.error_scaled < 0.1 * abs(target), rep

    lo = max(int(n_min), 2)
    while not eps * math.sqrt(lo) < lo * math.tan(model.theta):
        lo += 1
    hi = lo
    while True:
        good, _ = ok(hi)
        if good:
            break
        lo = hi
        hi *= 2
        if hi > cap:
            raise NumericalFailure(f"no n <= {cap:g} satisfies S_n n^4 <= {target:.4g}")
    if hi != lo:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid)[0]:
                hi = mid
            else:
                lo = mid
    N = hi
    n_seq = [N]
    while len(n_seq) < k_max:
        n_seq.append(n_seq[-1] ** 2 + n_seq[-1])
    if not supports_disjoint(n_seq):
        raise NumericalFailure("certificate supports overlap")
    scaled, errs = [], []
    for nk in n_seq:
        good, rep = ok(float(nk))
        if not good:
            raise NumericalFailure(f"member n={nk} fails the S_n bound: {rep.s_n_scaled:.4g} > {target:.4g}")
        scaled.append(rep.s_n_scaled)
        errs.append(rep.error_scaled)
    thr = -Fraction(model.alpha) ** 2 / 4
    bounds = [thr - Fraction(gamma) / Fraction(nk) ** 4 for nk in n_seq]
    return Certificate(model.theta, model.alpha, chi1.describe(), L, safety, gamma, N, n_seq, bounds,
                       scaled, errs, evals[0])
