import math

import numpy as np
import pytest

from conedelta.errors import NumericalFailure
from conedelta.quadrature import graded_edges, quad1d, tensor_integrate, tensor_rule


def test_quad1d_polynomial_and_breaks():
    v, e = quad1d(lambda x: x**3, 0, 2)
    assert v == pytest.approx(4.0, rel=1e-14) and e < 1e-10
    v, _ = quad1d(lambda x: abs(x - 0.3), 0, 1, points=[0.3, 5.0])
    assert v == pytest.approx(0.5 * 0.09 + 0.5 * 0.49, rel=1e-13)
    assert quad1d(math.sin, 1, 1) == (0.0, 0.0)


def test_quad1d_reports_failure():
    with pytest.raises(NumericalFailure):
        quad1d(lambda x: 1 / x, 0.0, 1.0, limit=5)


def test_tensor_rule_weights():
    S, T, W = tensor_rule([0, 1, 3], [-1, 1], 4)
    assert W.sum() == pytest.approx(6.0, rel=1e-15)
    assert S.shape == T.shape == W.shape == (8, 4)


def test_tensor_integrate_smooth():
    res = tensor_integrate(lambda S, T: np.exp(-S) * np.cos(T), graded_edges(0, 5, (), 4), [0, math.pi / 2])
    assert res.value == pytest.approx(1 - math.exp(-5), rel=1e-12)
    assert res.error <= 1e-10


def test_tensor_integrate_stalls():
    with pytest.raises(NumericalFailure):
        tensor_integrate(lambda S, T: np.sign(S - 0.3333) * 1.0 + 0 * T, [0, 1], [0, 1], order=4, max_order=8,
                         rtol=1e-15)


def test_graded_edges():
    e = graded_edges(0.0, 2.0, [1.0, 3.0], 2)
    np.testing.assert_allclose(e, [0, 0.5, 1, 1.5, 2])
