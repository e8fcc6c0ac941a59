import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conedelta.errors import InvalidInput
from conedelta.profiles import (hardy_check, hardy_poly_closed_forms, make_bump, make_hardy_poly,
                                make_plateau, select_hardy_exponent)
from conedelta.quadrature import quad1d


def _fd_check(prof, xs, h=1e-5, rtol=1e-6):
    fd1 = (prof.eval(xs + h) - prof.eval(xs - h)) / (2 * h)
    fd2 = (prof.d1(xs + h) - prof.d1(xs - h)) / (2 * h)
    # relative to the local size, floored by a fraction of the global scale
    s1 = np.maximum(abs(prof.d1(xs)), 1e-2 * np.max(abs(prof.d1(xs))))
    s2 = np.maximum(abs(prof.d2(xs)), 1e-2 * np.max(abs(prof.d2(xs))))
    assert np.max(abs(fd1 - prof.d1(xs)) / s1) <= rtol
    assert np.max(abs(fd2 - prof.d2(xs)) / s2) <= 100 * rtol


def test_bump_normalization_and_support():
    b = make_bump(1, 2)
    assert b.l2_norm_sq == pytest.approx(1.0, abs=1e-10)
    assert b.eval(1.0) == 0 and b.eval(2.0) == 0 and b.eval(0.5) == 0 and b.eval(3) == 0
    assert b.d1(1.0) == 0 and b.d1(2.0) == 0
    x = np.linspace(0.01, 0.49, 30)
    np.testing.assert_allclose(b.eval(1 + x), b.eval(2 - x), rtol=1e-13)
    _fd_check(b, np.linspace(1.05, 1.95, 19))


def test_bump_invalid():
    with pytest.raises(InvalidInput):
        make_bump(2, 1)


def test_plateau_values():
    eps = 0.4
    p = make_plateau(eps)
    assert p.eval(0.0) == 1 and p.d1(0.0) == 0
    assert p.eval(eps) == 0 and p.eval(-eps) == 0
    assert p.eval(eps / 2) == 1 and p.eval(-eps / 2) == 1
    t = np.linspace(-1.2 * eps, 1.2 * eps, 10_000)
    v = p.eval(t)
    assert v.min() >= 0 and v.max() <= 1
    pts = np.concatenate([np.linspace(-0.95, -0.55, 9), np.linspace(0.55, 0.95, 9)]) * eps
    _fd_check(p, pts, h=1e-6 * eps)
    with pytest.raises(InvalidInput):
        make_plateau(0.0)


def test_plateau_smooth_at_edges():
    p = make_plateau(1.0)
    for edge in (0.5, 1.0):
        for k in (p.eval, p.d1, p.d2):
            assert abs(k(edge + 1e-3) - k(edge - 1e-3)) < 1e-2


def test_hardy_poly_b1_closed_forms():
    c2, g, h = hardy_poly_closed_forms(1.0)
    assert c2 == 30 and g == pytest.approx(10, rel=1e-15) and h == pytest.approx(10, rel=1e-15)
    # oracle: 30 * int (1-2u)^2 = 10 ; 30 * int (1-u)^2 = 10 ; 30 * int u^2(1-u)^2 = 1
    assert 30 * quad1d(lambda u: (1 - 2 * u) ** 2, 0, 1)[0] == pytest.approx(10)
    assert 30 * quad1d(lambda u: (1 - u) ** 2, 0, 1)[0] == pytest.approx(10)
    assert 30 * quad1d(lambda u: u**2 * (1 - u) ** 2, 0, 1)[0] == pytest.approx(1)


@pytest.mark.parametrize("b", [0.51, 0.6, 0.8, 1.0, 1.5])
def test_hardy_poly_against_quadrature(b):
    p = make_hardy_poly(b)
    g = quad1d(lambda u: float(p.d1(u)) ** 2, 0, 1)[0]
    h = quad1d(lambda u: float(p.eval(u)) ** 2 / u**2 if u > 0 else 0.0, 0, 1)[0]
    n = quad1d(lambda u: float(p.eval(u)) ** 2, 0, 1)[0]
    assert p.grad_sq == pytest.approx(g, rel=1e-9)
    assert p.hardy_int == pytest.approx(h, rel=1e-9)
    assert n == pytest.approx(1.0, abs=1e-10)
    assert p.eval(0.0) == 0 and p.eval(1.0) == 0


def test_ratio_tends_to_quarter():
    r = [make_hardy_poly(b).grad_sq / make_hardy_poly(b).hardy_int for b in (1.0, 0.8, 0.6, 0.51)]
    assert all(x > y for x, y in zip(r, r[1:]))
    assert r[-1] > 0.25 and r[-1] - 0.25 < 0.011


@given(st.floats(0.5001, 5.0))
def test_classical_hardy(b):
    p = make_hardy_poly(b)
    assert p.grad_sq - p.hardy_int / 4 >= -1e-12 * p.grad_sq


def test_hardy_poly_invalid():
    for b in (0.5, 0.2, float("nan")):
        with pytest.raises(InvalidInput):
            make_hardy_poly(b)


def test_hardy_check_boundary_cases():
    p = make_hardy_poly(1.0)
    r8 = hardy_check(p, math.pi / 8)
    assert r8.satisfied and r8.bound * 10 == pytest.approx(10 / (2 * (1 - math.cos(math.pi / 4))))
    r6 = hardy_check(p, math.pi / 6)
    assert not r6.satisfied
    assert not hardy_check(p, math.pi / 2 - 1e-9).satisfied


def test_hardy_check_quadrature_path_and_divergence():
    inner = make_bump(0.2, 0.8)
    rep = hardy_check(inner, 0.1)
    g = quad1d(lambda u: float(inner.d1(u)) ** 2, 0.2, 0.8)[0]
    assert rep.grad_sq == pytest.approx(g, rel=1e-9)
    assert rep.satisfied == (rep.grad_sq < rep.hardy_int * rep.bound)
    # plateau-like profile that does not vanish at 0
    from conedelta.profiles import SmoothProfile
    flat = SmoothProfile("smooth_bump", (0.0, 1.0), lambda u: 1.0 - u, lambda u: -1.0 + 0 * u,
                         lambda u: 0 * u, 1 / 3)
    rep = hardy_check(flat, 0.3)
    assert rep.infinite and not rep.satisfied


@pytest.mark.parametrize("theta", [math.pi / 8, math.pi / 4, math.pi / 3, 4 * math.pi / 9, 1.5, 1.57])
def test_select_exponent_passes(theta):
    b = select_hardy_exponent(theta, 0.1)
    assert 0.5 < b <= 1.0
    rep = hardy_check(make_hardy_poly(b), theta)
    assert rep.satisfied


def test_select_exponent_margin_and_limits():
    b = select_hardy_exponent(math.pi / 8, 0.1)
    rep = hardy_check(make_hardy_poly(b), math.pi / 8)
    assert b == 1.0 and rep.margin >= 0.1 * rep.bound * rep.hardy_int
    assert select_hardy_exponent(math.pi / 6 - 0.01, 0.01) > 0.95
    assert select_hardy_exponent(1.5707, 0.1) - 0.5 < 1e-4
    with pytest.raises(InvalidInput):
        select_hardy_exponent(0.3, 1.5)
