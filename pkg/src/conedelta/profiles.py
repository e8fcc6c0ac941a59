"""One-dimensional cutoff profiles with closed-form derivatives.

Three classes are provided:

``smooth_bump``
    The standard mollifier ``exp(-1/(1 - y^2))`` moved to ``(a, b)``, i.e.
    ``c * exp(-k / ((x - a)(b - x)))`` with ``k = (b - a)^2 / 4``, unit L2 norm.
``plateau_cutoff``
    Even cutoff equal to one on ``|t| <= eps/2`` and zero for ``|t| >= eps``.
``hardy_poly``
    ``c * u**b * (1 - u)`` on ``[0, 1]``, unit L2 norm, with all Hardy-type
    integrals in closed form.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidInput, NumericalFailure
from .quadrature import quad1d

CLASS_TAGS = ("smooth_bump", "plateau_cutoff", "hardy_poly")


@dataclass(frozen=True)
class SmoothProfile:
    """A compactly supported 1D function with its first two derivatives.

    The callables are vectorized and must return zero outside ``support``.
    """

    class_tag: str
    support: tuple
    value_fn: Callable = field(repr=False)
    d1_fn: Callable = field(repr=False)
    d2_fn: Callable = field(repr=False)
    l2_norm_sq: float
    normalized: bool = False
    params: dict = field(default_factory=dict)
    # closed forms, when known
    grad_sq: float | None = None
    hardy_int: float | None = None

    def __post_init__(self):
        if self.class_tag not in CLASS_TAGS:
            raise InvalidInput(f"unknown profile class {self.class_tag!r}")
        a, b = self.support
        if not a < b:
            raise InvalidInput("profile support must be a non-empty interval")

    def eval(self, x):
        return self.value_fn(np.asarray(x, dtype=float))

    def d1(self, x):
        return self.d1_fn(np.asarray(x, dtype=float))

    def d2(self, x):
        return self.d2_fn(np.asarray(x, dtype=float))

    __call__ = eval

    def describe(self) -> dict:
        return {"class": self.class_tag, "support": list(self.support), "l2_norm_sq": self.l2_norm_sq,
                "normalized": self.normalized, **self.params}


def _scalar(fn):
    return lambda x: float(fn(np.asarray(x, dtype=float)))


# ---------------------------------------------------------------- smooth bump

def make_bump(a: float = 1.0, b: float = 2.0) -> SmoothProfile:
    """Normalized mollifier ``c exp(-k/((x-a)(b-x)))``, ``k = (b-a)^2/4``, on ``[a, b]``."""
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise InvalidInput(f"bump needs a < b, got ({a!r}, {b!r})")

    kappa = 0.25 * (b - a) ** 2

    def parts(x):
        q = (x - a) * (b - x)
        inside = q > 0
        qs = np.where(inside, q, 1.0)
        e = np.where(inside, np.exp(-kappa / qs), 0.0)
        dq = a + b - 2.0 * x
        phi1 = kappa * dq / qs**2
        phi2 = kappa * (-2.0 / qs**2 - 2.0 * dq**2 / qs**3)
        return e, np.where(inside, phi1, 0.0), np.where(inside, phi2, 0.0)

    raw_sq, _ = quad1d(lambda x: float(parts(np.asarray(x))[0] ** 2), a, b)
    if not raw_sq > 0:
        raise NumericalFailure("bump normalization integral vanished")
    c = 1.0 / math.sqrt(raw_sq)

    def f(x):
        return c * parts(x)[0]

    def f1(x):
        e, p1, _ = parts(x)
        return c * e * p1

    def f2(x):
        e, p1, p2 = parts(x)
        return c * e * (p1 * p1 + p2)

    norm_sq, _ = quad1d(_scalar(lambda x: f(x) ** 2), a, b)
    return SmoothProfile("smooth_bump", (float(a), float(b)), f, f1, f2, norm_sq, True,
                         {"a": float(a), "b": float(b), "c": c})


# ------------------------------------------------------------------- plateau

def _smoothstep(y):
    """``T(y) = f(y)/(f(y)+f(1-y))`` with ``f(y) = exp(-1/y)``, and T', T''."""
    y = np.asarray(y, dtype=float)
    yc = np.clip(y, 0.0, 1.0)

    def fk(x):
        # f, f', f'' with f = exp(-1/x); zero for x <= 0
        pos = x > 0
        xs = np.where(pos, x, 1.0)
        f0 = np.where(pos, np.exp(-1.0 / xs), 0.0)
        lx = np.log(xs)
        f1 = np.where(pos, np.exp(-1.0 / xs - 2.0 * lx), 0.0)
        f2 = np.where(pos, np.exp(-1.0 / xs - 4.0 * lx) - 2.0 * np.exp(-1.0 / xs - 3.0 * lx), 0.0)
        return f0, f1, f2

    f0, f1, f2 = fk(yc)
    g0, g1, g2 = fk(1.0 - yc)
    g1 = -g1  # d/dy of f(1-y)
    D = f0 + g0
    D1 = f1 + g1
    num1 = f1 * g0 - f0 * g1
    T = f0 / D
    T1 = num1 / D**2
    T2 = (f2 * g0 - f0 * g2) / D**2 - 2.0 * num1 * D1 / D**3
    T = np.where(y >= 1.0, 1.0, np.where(y <= 0.0, 0.0, T))
    inside = (y > 0.0) & (y < 1.0)
    return T, np.where(inside, T1, 0.0), np.where(inside, T2, 0.0)


def make_plateau(eps: float) -> SmoothProfile:
    """Even C-infinity cutoff: one on ``|t| <= eps/2``, zero on ``|t| >= eps``."""
    if not (math.isfinite(eps) and eps > 0):
        raise InvalidInput(f"plateau width must be > 0, got {eps!r}")

    def y_of(t):
        return 2.0 * (eps - np.abs(t)) / eps

    def f(t):
        return _smoothstep(y_of(t))[0]

    def f1(t):
        return _smoothstep(y_of(t))[1] * (-2.0 * np.sign(t) / eps)

    def f2(t):
        return _smoothstep(y_of(t))[2] * (4.0 / eps**2)

    half, _ = quad1d(_scalar(lambda t: f(t) ** 2), 0.0, eps, points=[0.5 * eps])
    return SmoothProfile("plateau_cutoff", (-float(eps), float(eps)), f, f1, f2, 2.0 * half, False,
                         {"eps": float(eps)})


# ---------------------------------------------------------------- hardy poly

def hardy_poly_closed_forms(b_exp: float):
    """``(c^2, ||chi'||^2, int chi^2/u^2)`` for ``chi = c u^b (1-u)`` with unit norm."""
    b = float(b_exp)
    c2 = (2 * b + 1) * (2 * b + 2) * (2 * b + 3) / 2.0
    hardy = 2.0 * c2 / ((2 * b - 1) * (2 * b) * (2 * b + 1))
    # ||chi'||^2 / hardy_int simplifies to b^2 exactly
    grad = b * b * hardy
    return c2, grad, hardy


def make_hardy_poly(b_exp: float) -> SmoothProfile:
    """Normalized ``c u^b (1-u)`` on ``[0, 1]``; needs ``b > 1/2``."""
    b = float(b_exp)
    if not (math.isfinite(b) and b > 0.5):
        raise InvalidInput(f"hardy_poly exponent must exceed 1/2, got {b_exp!r}")
    c2, grad, hardy = hardy_poly_closed_forms(b)
    c = math.sqrt(c2)

    def _mask(u):
        return (u >= 0.0) & (u <= 1.0)

    def f(u):
        uc = np.clip(u, 0.0, 1.0)
        return np.where(_mask(u), c * uc**b * (1.0 - uc), 0.0)

    def f1(u):
        uc = np.clip(u, 1e-300, 1.0)
        return np.where(_mask(u) & (u > 0), c * uc ** (b - 1.0) * (b - (b + 1.0) * uc), 0.0)

    def f2(u):
        uc = np.clip(u, 1e-300, 1.0)
        val = c * (b * (b - 1.0) * uc ** (b - 2.0) * (1.0 - uc) - 2.0 * b * uc ** (b - 1.0))
        return np.where(_mask(u) & (u > 0), val, 0.0)

    return SmoothProfile("hardy_poly", (0.0, 1.0), f, f1, f2, 1.0, True, {"b_exp": b},
                         grad_sq=grad, hardy_int=hardy)


# ------------------------------------------------------------- Hardy checks

@dataclass(frozen=True)
class HardyReport:
    grad_sq: float
    hardy_int: float
    bound: float
    satisfied: bool
    margin: float
    infinite: bool = False

    def to_dict(self):
        return asdict(self)


# relative slack below which the strict inequality is treated as equality;
# it absorbs the rounding of sin(theta) at exact boundary angles
STRICT_RTOL = 1e-12


def hardy_bound(theta: float) -> float:
    """``1 / (4 sin^2 theta)``."""
    if not (0.0 < theta < math.pi / 2):
        raise InvalidInput(f"theta must lie in (0, pi/2), got {theta!r}")
    return 1.0 / (4.0 * math.sin(theta) ** 2)


def hardy_check(profile: SmoothProfile, theta: float) -> HardyReport:
    """Compare ``||chi'||^2`` with ``int chi^2/u^2 / (4 sin^2 theta)`` on ``(0, 1)``.

    Satisfied means the strict inequality holds by more than a relative
    ``STRICT_RTOL``.  A profile not vanishing at 0 has a divergent right-hand
    side and is reported unsatisfied with ``infinite=True``.
    """
    bound = hardy_bound(theta)
    a, b = profile.support
    if a < -1e-14 or b > 1.0 + 1e-14:
        raise InvalidInput("Hardy check needs a profile supported in [0, 1]")
    if profile.grad_sq is not None and profile.hardy_int is not None:
        grad, hardy = profile.grad_sq, profile.hardy_int
    else:
        if abs(float(profile.eval(max(a, 0.0)))) > 1e-12 and a <= 0.0:
            return HardyReport(float("nan"), float("inf"), bound, False, float("-inf"), True)
        grad, _ = quad1d(_scalar(lambda u: profile.d1(u) ** 2), a, b)
        lo = max(a, 0.0)
        try:
            hardy, _ = quad1d(_scalar(lambda u: profile.eval(u) ** 2 / u**2 if u > 0 else 0.0), lo, b)
        except NumericalFailure:
            return HardyReport(grad, float("inf"), bound, False, float("-inf"), True)
    margin = bound * hardy - grad
    ok = margin > STRICT_RTOL * bound * hardy
    return HardyReport(float(grad), float(hardy), bound, bool(ok), float(margin))


def select_hardy_exponent(theta: float, margin: float = 0.1) -> float:
    """Largest ``b`` in ``(1/2, 1]`` whose profile passes the Hardy check with room.

    The target is ``grad_sq <= (1 - margin) * bound * hardy_int``.  For angles
    so close to ``pi/2`` that ``(1 - margin) * bound <= 1/4`` no exponent
    meets it, and the target becomes ``bound - margin * (bound - 1/4)``,
    i.e. the margin is taken relative to the gap above the sharp Hardy
    constant.  Since ``grad_sq / hardy_int == b**2`` the answer is explicit.
    """
    if not (0.0 < margin < 1.0):
        raise InvalidInput(f"margin must lie in (0, 1), got {margin!r}")
    bound = hardy_bound(theta)
    target = (1.0 - margin) * bound
    if target <= 0.25:
        target = bound - margin * (bound - 0.25)
    b = min(1.0, math.sqrt(target))
    # guard against rounding pushing b^2 above the target
    while b * b > target:
        b = math.nextafter(b, 0.0)
    if not b > 0.5:
        raise NumericalFailure(f"no Hardy exponent found for theta={theta!r}")
    return b
