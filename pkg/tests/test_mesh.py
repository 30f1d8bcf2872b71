import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochbgk.mesh import make_grid, wrap_x


def test_small_grid_arithmetic():
    g = make_grid(4, 4, -1.0, 1.0)
    assert g.dx == 0.25
    assert g.dxi == 0.5
    np.testing.assert_array_equal(g.xi_centers, [-0.75, -0.25, 0.25, 0.75])
    np.testing.assert_array_equal(g.x_centers, [0.125, 0.375, 0.625, 0.875])


def test_velocity_width():
    g = make_grid(512, 256, -1.5, 2.5)
    assert g.dxi == 4 / 256 == 0.015625


@pytest.mark.parametrize("args", [(4, 4, 0.5, 1.0), (4, 4, -1.0, 0.0), (3, 4, -1, 1), (4, 0, -1, 1),
                                  (4, 4, -np.inf, 1.0), (4.5, 4, -1, 1)])
def test_rejects_bad_grids(args):
    with pytest.raises(ValueError):
        make_grid(*args)


@pytest.mark.parametrize("x, expected", [(1.25, 0.25), (-0.1, 0.9), (0.5, 0.5)])
def test_wrap_examples(x, expected):
    g = make_grid(4, 4, -1, 1)
    assert wrap_x(g, x) == pytest.approx(expected, abs=1e-15)


def test_wrap_rejects_non_finite():
    g = make_grid(4, 4, -1, 1)
    with pytest.raises(ValueError):
        wrap_x(g, [0.1, np.nan])


@given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
def test_wrap_idempotent_and_in_range(x):
    g = make_grid(4, 4, -1, 1)
    w = wrap_x(g, x)
    assert 0.0 <= w < 1.0
    assert wrap_x(g, w) == w


@given(st.integers(4, 4096), st.floats(0.01, 50), st.floats(0.01, 50))
def test_unit_quadrature_and_spacing(nxi, lo, hi):
    g = make_grid(4, nxi, -lo, hi)
    total = g.xi_quadrature(np.ones(nxi))
    assert abs(total - (hi + lo)) <= 4 * np.spacing(hi + lo)
    assert g.dx * g.nx == 1.0
    d = np.diff(g.xi_centers)
    assert np.all(d > 0)
    np.testing.assert_allclose(d, g.dxi, rtol=1e-9)


def test_grid_arrays_are_read_only():
    g = make_grid(8, 8, -1, 1)
    with pytest.raises(ValueError):
        g.xi_centers[0] = 3.0
