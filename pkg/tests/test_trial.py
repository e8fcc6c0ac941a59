import math
from fractions import Fraction

import numpy as np
import pytest

from conedelta.errors import InvalidInput, NumericalFailure
from conedelta.geometry import ConeModel
from conedelta.profiles import make_hardy_poly, make_plateau
from conedelta.trial import (N_MAX, build_certificate, compute_sn, default_eps, discrete_member,
                             essential_member, form_terms, random_test_function, rayleigh_quotient,
                             reduced_form_value, sn_limit, supports_disjoint, weighted_3d_form_value)

EIGHTH = ConeModel(1.0, math.pi / 8)


def test_default_eps():
    assert default_eps(math.pi / 4) == pytest.approx(0.5)
    assert default_eps(0.1) == pytest.approx(math.tan(0.1) / 2)


def test_fields_tensor_and_pointwise_agree():
    w = essential_member(16.0, 0.7, ConeModel(1.0, math.pi / 4))
    s = np.linspace(*w.s_support, 7)
    t = np.linspace(*w.t_support, 5)
    S, T = np.meshgrid(s, t, indexing="ij")
    grid_vals = w.fields(S, T)
    for i in range(7):
        for j in range(5):
            pt = w.fields(np.array([s[i]]), np.array([t[j]]))
            for g, q in zip(grid_vals, pt):
                np.testing.assert_allclose(g[:, i, j], q[:, 0], rtol=1e-14, atol=1e-300)


def test_member_support_near_axis_rejected():
    with pytest.raises(InvalidInput):
        essential_member(0.01, 0.0, ConeModel(1.0, 0.1), eps=1.0)


def test_reduction_identity_random():
    rng = np.random.default_rng(3)
    for _ in range(3):
        m = ConeModel(rng.uniform(0.5, 2), rng.uniform(0.3, 1.2))
        f = random_test_function(m, rng)
        red = reduced_form_value(f)
        assert weighted_3d_form_value(f) == pytest.approx(red, rel=1e-9)


def test_rayleigh_quotient_above_global_bound():
    m = ConeModel(1.0, math.pi / 4)
    w = discrete_member(20.0, m, make_hardy_poly(0.67))
    rq = rayleigh_quotient(w)
    assert rq >= -0.5 and np.isfinite(rq)
    t = form_terms(w)
    assert t.norm_sq > 0 and t.grad_sq > 0


def test_sn_methods_agree_and_terms_sum():
    chi = make_hardy_poly(1.0)
    q = compute_sn(1000.0, EIGHTH, chi, method="quadrature")
    e = compute_sn(1000.0, EIGHTH, chi, method="expansion")
    assert q.s_n_scaled == pytest.approx(e.s_n_scaled, rel=1e-8)
    assert q.term_sum == pytest.approx(q.s_n, rel=1e-6, abs=1e-12)
    assert compute_sn(5000.0, EIGHTH, chi).method == "expansion"


def test_sn_converges_to_limit_at_large_n():
    chi = make_hardy_poly(1.0)
    L = sn_limit(EIGHTH, chi)
    assert L == pytest.approx(2 * (10 - 10 / (4 * math.sin(math.pi / 8) ** 2)), rel=1e-14)
    errs = [abs(compute_sn(n, EIGHTH, chi).s_n_scaled / L - 1) for n in (1e6, 1e8, 1e12)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-4


def test_sn_validation():
    chi = make_hardy_poly(1.0)
    with pytest.raises(InvalidInput):
        compute_sn(10 * N_MAX, EIGHTH, chi)
    with pytest.raises(InvalidInput):
        compute_sn(1e4, EIGHTH, chi, method="magic")
    with pytest.raises(InvalidInput):
        sn_limit(ConeModel(1.0, math.pi / 6), chi)


def test_supports_disjoint_exact():
    assert supports_disjoint([3, 12, 156])
    assert not supports_disjoint([3, 11])


@pytest.fixture(scope="module")
def cert_quarter():
    m = ConeModel(1.0, math.pi / 4)
    return build_certificate(m, make_hardy_poly(0.6708203932499369), k_max=3)


def test_certificate_structure(cert_quarter):
    c = cert_quarter
    assert c.gamma > 0 and c.limit_L < 0
    assert all(b == a * a + a for a, b in zip(c.n_seq, c.n_seq[1:]))
    assert all(isinstance(b, Fraction) and b < Fraction(-1, 4) for b in c.bounds)
    assert c.bounds == sorted(c.bounds)
    assert all(s <= c.limit_L * c.safety for s in c.member_sn_scaled)
    d = c.to_dict()
    assert d["n_seq"][1] == str(c.n_seq[1])


def test_certificate_minimality(cert_quarter):
    m = ConeModel(1.0, math.pi / 4)
    chi = make_hardy_poly(0.6708203932499369)
    N = cert_quarter.n_start
    target = cert_quarter.limit_L * cert_quarter.safety
    assert compute_sn(N - 1, m, chi).s_n_scaled > target


def test_certificate_infeasible_cap():
    with pytest.raises(NumericalFailure):
        build_certificate(EIGHTH, make_hardy_poly(1.0), cap=1000)
    with pytest.raises(InvalidInput):
        build_certificate(EIGHTH, make_hardy_poly(1.0), safety=1.5)
