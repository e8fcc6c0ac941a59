"""Singular sequences for the bottom of the essential spectrum.

``omega_{n,p}(s, t) = n^{-1/2} chi1(s/n) e^{ips} chi2(t/n) e^{-alpha|t|/2}``
with ``chi1`` a unit bump on ``(1, 2)``.  Away from the ray the reduced
operator is ``-d_s^2 - d_t^2 - 1/(4 r^2)``; across the ray the jump of
``d_t omega`` equals ``-alpha omega`` exactly, so the delta term needs no
separate treatment and the defect is a plain 2D integral over ``t != 0``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput
from .geometry import ConeModel
from .quadrature import quad1d
from .trial import TrialFunction, default_eps, essential_member, tensor_axes

WeylFunction = TrialFunction


@dataclass(frozen=True)
class DefectReport:
    n: float
    p: float
    norm_sq: float
    grad_sq: float
    defect: float
    target_energy: float
    energy: float
    rho: float
    quad_error: float

    def to_dict(self):
        return asdict(self)


def weyl_function(n: float, p: float, model: ConeModel, eps: float | None = None) -> TrialFunction:
    return essential_member(n, p, model, eps)


def _transverse_integrals(n, model, chi2):
    """``T0 = int chi2(t/n)^2 e^{-alpha|t|}`` and ``T1 = int |d_t B|^2``."""
    al = model.alpha
    eps = chi2.params["eps"]
    h = eps * n

    def f0(t):
        return float(chi2.eval(t / n)) ** 2 * math.exp(-al * t)

    def f1(t):
        return (float(chi2.d1(t / n)) / n - 0.5 * al * float(chi2.eval(t / n))) ** 2 * math.exp(-al * t)

    T0, e0 = quad1d(f0, 0.0, h, points=[0.5 * h])
    T1, e1 = quad1d(f1, 0.0, h, points=[0.5 * h])
    return 2.0 * T0, 2.0 * T1, 2.0 * (e0 + e1)


def weyl_norms(n: float, p: float, model: ConeModel, eps: float | None = None):
    """``(||omega||^2, ||grad omega||^2)`` from factorized 1D integrals.

    ``||omega||^2 = ||chi1||^2 T0`` and
    ``||grad omega||^2 = (||chi1'||^2/n^2 + p^2 ||chi1||^2) T0 + ||chi1||^2 T1``.
    """
    w = weyl_function(n, p, model, eps)
    c1 = w.chi1
    a, b = c1.support
    G, _ = quad1d(lambda x: float(c1.d1(x)) ** 2, a, b)
    N1 = c1.l2_norm_sq
    T0, T1, _ = _transverse_integrals(float(n), model, w.chi2)
    return N1 * T0, (G / n**2 + p * p * N1) * T0 + N1 * T1


def jump_residual(n: float, p: float, model: ConeModel, eps: float | None = None, samples: int = 257) -> float:
    """``max_s |d_t omega(s,0+) - d_t omega(s,0-) + alpha omega(s,0)|`` over sampled ``s``."""
    w = weyl_function(n, p, model, eps)
    s = np.linspace(*w.s_support, samples)
    t = np.zeros_like(s)
    val, _, dp = w.fields(s, t, np.ones_like(s))
    _, _, dm = w.fields(s, t, -np.ones_like(s))
    return float(np.max(np.abs(dp - dm + model.alpha * val)))


def weyl_defect(n: float, p: float, model: ConeModel, detune: float = 0.0,
                eps: float | None = None) -> DefectReport:
    """``||(H - E) omega|| / ||omega||`` with ``E = p^2 - alpha^2/4 + detune``.

    ``H omega = -omega_ss - omega_tt - omega/(4 r^2)`` off the ray, evaluated
    with closed-form derivatives of the profiles.
    """
    w = weyl_function(n, p, model, eps)
    f = w.function
    al = model.alpha
    target = p * p - 0.25 * al * al
    energy = target + detune

    def density(S, T):
        s1, t1 = tensor_axes(S, T)
        side = np.sign(t1)
        a, da, d2a = f.A(s1), f.dA(s1), f.d2A(s1)
        b, d2b = f.B(t1), f.d2B(t1, side)
        r = f.radius(S, T)
        # (H - E) omega = -e^{ips} (X + i Y)
        X = d2a * b - p * p * a * b + a * d2b + a * b / (4.0 * r * r) + energy * a * b
        Y = 2.0 * p * da * b
        return X * X + Y * Y

    res = f.integrate(density, rtol=1e-9)
    norm_sq, grad_sq = weyl_norms(n, p, model, eps)
    return DefectReport(float(n), float(p), norm_sq, grad_sq, math.sqrt(max(res.value, 0.0) / norm_sq),
                        target, energy, w.rho, res.error)


@dataclass(frozen=True)
class WeylSweep:
    reports: list
    exponent: float  # q in defect ~ C n^-q
    prefactor: float

    def to_dict(self):
        return {"reports": [r.to_dict() for r in self.reports], "exponent": self.exponent,
                "prefactor": self.prefactor}


def weyl_sweep(p: float, n_list: Sequence[float], model: ConeModel, detune: float = 0.0,
               eps: float | None = None) -> WeylSweep:
    """Defects along ``n_list`` plus a least-squares fit of ``log defect`` on ``log n``."""
    n_list = [float(x) for x in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise InvalidInput("n_list must be strictly ascending")
    reps = [weyl_defect(n, p, model, detune, eps) for n in n_list]
    if len(reps) >= 2:
        slope, icpt = np.polyfit(np.log(n_list), np.log([r.defect for r in reps]), 1)
        q, C = float(-slope), float(math.exp(icpt))
    else:
        q, C = float("nan"), float("nan")
    return WeylSweep(reps, q, C)


def dyadic_supports_disjoint(n_list: Sequence[float]) -> bool:
    """Open supports ``(n, 2n)`` of the listed members do not overlap."""
    iv = sorted((float(n), 2.0 * float(n)) for n in n_list)
    return all(hi <= lo for (_, hi), (lo, _) in zip(iv, iv[1:]))
