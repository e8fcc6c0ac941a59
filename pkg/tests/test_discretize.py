import math

import numpy as np
import pytest
import scipy.sparse as sp

from conedelta import _kernels
from conedelta.discretize import (Generatrix, assemble, assemble_deformed, build_grid, cell_kinds,
                                  cut_segments, default_grid, line_quadrature)
from conedelta.errors import InvalidInput
from conedelta.geometry import ConeModel

Q = ConeModel(1.0, math.pi / 4)


@pytest.fixture(scope="module")
def small():
    grid = build_grid(Q, 8.0, 8.0, 0.5)
    return grid, assemble(grid, Q)


def test_grid_shape_and_validation():
    g = build_grid(Q, 4.0, 3.0, 0.5)
    assert g.n_unknowns == len(g.unknown_coords()[0])
    assert g.h_r == 0.5
    with pytest.raises(InvalidInput):
        build_grid(Q, 4.1, 3.0, 0.5)
    d = default_grid(ConeModel(2.0, 0.5))
    assert d.r_max == pytest.approx(12.0) and d.h_r == pytest.approx(0.125)


def test_matrices_symmetric_exactly(small):
    _, P = small
    for m in (P.stiffness, P.line):
        assert (m - m.T).count_nonzero() == 0
    assert np.all(P.mass > 0)


def test_stiffness_kills_constants_and_line_length(small):
    grid, P = small
    one = np.ones(P.n)
    # Neumann on the axis, Dirichlet on the box: constant has energy only next to the box walls
    r, z = grid.unknown_coords()
    inner = (r < grid.r_max - 2 * grid.h_r) & (np.abs(z) < grid.z_max - 2 * grid.h_z)
    assert np.max(np.abs((P.stiffness @ one)[inner])) < 1e-12
    # int_ray r dl for the linear interpolant of 1 over the part of the ray inside
    # the layer of interior nodes: close to the analytic value
    assert (one @ P.line @ one) > 0


def test_line_form_integrates_r_along_ray():
    grid = build_grid(Q, 8.0, 8.0, 0.5)
    pts = Generatrix.straight_ray(Q.theta).points(100.0)
    ei, ej, xi, eta, w = line_quadrature(grid, pts)
    # weights carry the factor r: int_0^L r dl = sin(theta) L^2 / 2 with L = 8 sqrt 2
    L = 8.0 * math.sqrt(2)
    assert w.sum() == pytest.approx(math.sin(Q.theta) * L * L / 2, rel=1e-12)
    segs = cut_segments(grid, pts)
    assert len(segs) > 0


def test_cell_kinds_on_diagonal(small):
    grid, _ = small
    kind = cell_kinds(grid, Generatrix.straight_ray(Q.theta).points(100.0))
    assert set(np.unique(kind)) <= {0, 1, 2}
    assert np.count_nonzero(kind == 1) == 16


def test_backends_bitwise_identical():
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    grid = build_grid(Q, 6.0, 6.0, 0.5)
    gen = Generatrix.bump(Q.theta, 3.0, 0.4)
    prev = _kernels.backend()
    try:
        out = {}
        for b in ("numba", "numpy"):
            _kernels.set_backend(b)
            P = assemble_deformed(grid, Q, gen)
            out[b] = P
        a, b = out["numba"], out["numpy"]
        assert (a.stiffness != b.stiffness).nnz == 0 and (a.line != b.line).nnz == 0
        assert np.array_equal(a.mass, b.mass)
    finally:
        _kernels.set_backend(prev)


def test_env_flag_selects_numpy(monkeypatch):
    import importlib

    monkeypatch.setenv("CONEDELTA_NO_NUMBA", "1")
    mod = importlib.reload(_kernels)
    try:
        assert mod.backend() == "numpy"
    finally:
        monkeypatch.delenv("CONEDELTA_NO_NUMBA")
        importlib.reload(_kernels)
    with pytest.raises(ValueError):
        _kernels.set_backend("fortran")


def test_generatrix_validation(tmp_path):
    th = Q.theta
    with pytest.raises(InvalidInput):
        Generatrix.from_polyline([[1.0, 0.0], [2.0, 2.0]], th)
    with pytest.raises(InvalidInput):
        Generatrix.from_polyline([[0.0, 0.0], [1.0, 0.0]], th)  # last vertex off the ray
    bad = [[0, 0], [1.0, 0.2], [0.5, 1.5], [0.6, -0.2], [2 * math.sin(th) * 2, 2 * math.cos(th) * 2]]
    with pytest.raises(InvalidInput):
        Generatrix.from_polyline(bad, th)
    g = Generatrix.bump(th, 4.0, 0.5)
    assert not g.straight and g.R0 <= 4.0 + 1e-9 and g.is_simple()
    f = tmp_path / "ray.txt"
    f.write_text("# r z\n0 0\n%r %r\n" % (3 * math.sin(th), 3 * math.cos(th)))
    assert Generatrix.from_file(f, th).straight
    with pytest.raises(InvalidInput):
        assemble(build_grid(Q, 2.0, 2.0, 0.5), Q, g)


def test_undeformed_polyline_matches_ray(small):
    grid, P = small
    s = np.linspace(0, 5, 6)
    gen = Generatrix.from_polyline(np.column_stack([s * math.sin(Q.theta), s * math.cos(Q.theta)]), Q.theta)
    P2 = assemble_deformed(grid, Q, gen)
    assert abs(P2.stiffness - P.stiffness).max() < 1e-13
    assert abs(P2.line - P.line).max() < 1e-13


def test_scaling_of_pencil():
    g1 = build_grid(Q, 8.0, 8.0, 0.5)
    m2 = ConeModel(2.0, Q.theta)
    g2 = build_grid(m2, 4.0, 4.0, 0.25)
    P1, P2 = assemble(g1, Q), assemble(g2, m2)
    # A scales like 1/c under r -> r/c with the r weight, M like 1/c^3
    np.testing.assert_allclose(P2.mass * 8, P1.mass, rtol=1e-13)
    assert abs(P2.A * 2 - P1.A).max() < 1e-12
