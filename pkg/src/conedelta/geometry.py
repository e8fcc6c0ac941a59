"""Cone model and the (s, t) <-> (r, z) frame attached to the generating ray.

The meridian half-plane is ``{(r, z): r > 0}``.  The ray ``z = r cot(theta)``
is parametrized by arclength ``s``; ``t`` is the signed distance from the ray,
positive below it (towards larger ``r`` / smaller ``z``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput


@dataclass(frozen=True)
class ConeModel:
    """Coupling strength ``alpha`` and half-angle ``theta`` (radians)."""

    alpha: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidInput(f"alpha must be > 0, got {self.alpha!r}")
        if not (0.0 < self.theta < math.pi / 2):
            raise InvalidInput(f"theta must lie in (0, pi/2) radians, got {self.theta!r}")

    @property
    def threshold(self) -> float:
        """Bottom of the essential spectrum, ``-alpha**2 / 4``."""
        return -self.alpha * self.alpha / 4.0

    @property
    def frame(self) -> "RayFrame":
        return RayFrame(self.theta)

    @classmethod
    def from_degrees(cls, alpha: float, theta_deg: float) -> "ConeModel":
        return cls(alpha, math.radians(theta_deg))


def _check_theta(theta):
    if not (0.0 < theta < math.pi / 2):
        raise InvalidInput(f"theta must lie in (0, pi/2) radians, got {theta!r}")


def st_to_rz(s, t, theta):
    """Map ray coordinates to meridian coordinates (a rotation by ``theta``)."""
    _check_theta(theta)
    st, ct = math.sin(theta), math.cos(theta)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return s * st + t * ct, s * ct - t * st


def rz_to_st(r, z, theta):
    """Inverse of :func:`st_to_rz`."""
    _check_theta(theta)
    st, ct = math.sin(theta), math.cos(theta)
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    return r * st + z * ct, r * ct - z * st


def weight_r(s, t, theta):
    """Distance to the symmetry axis, ``r(s, t)``.  Not clipped at zero."""
    return np.asarray(s, dtype=float) * math.sin(theta) + np.asarray(t, dtype=float) * math.cos(theta)


@dataclass(frozen=True)
class RayFrame:
    theta: float

    def __post_init__(self):
        _check_theta(self.theta)

    def to_rz(self, s, t):
        return st_to_rz(s, t, self.theta)

    def to_st(self, r, z):
        return rz_to_st(r, z, self.theta)

    def r(self, s, t):
        return weight_r(s, t, self.theta)

    def axis_offset(self, s):
        """Value of ``t`` at which the normal line through ``s`` hits the axis."""
        return -np.asarray(s, dtype=float) * math.tan(self.theta)
