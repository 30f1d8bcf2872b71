import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochbgk.mesh import make_grid
from stochbgk.models import burgers_flux, linear_flux, omez_noise, zero_noise
from stochbgk.reference import (RiemannProblem, exact_riemann_burgers, exact_square_wave_burgers,
                                fv_solve, fv_step, lp_error, restrict)
from stochbgk.wiener import sample_path


def test_riemann_shock_examples():
    prob = RiemannProblem(1.0, 0.0)
    assert exact_riemann_burgers(prob, 0.1, 0.1) == 0.0
    assert exact_riemann_burgers(prob, 0.04, 0.1) == 1.0   # shock at 0.05
    assert exact_riemann_burgers(prob, 0.06, 0.1) == 0.0


def test_riemann_rarefaction_examples():
    prob = RiemannProblem(0.0, 1.0)
    assert exact_riemann_burgers(prob, 0.05, 0.1) == pytest.approx(0.5)
    assert exact_riemann_burgers(prob, -0.01, 0.1) == 0.0
    assert exact_riemann_burgers(prob, 0.2, 0.1) == 1.0


def test_riemann_initial_jump_and_negative_time():
    prob = RiemannProblem(2.0, -1.0, x0=0.3)
    np.testing.assert_array_equal(exact_riemann_burgers(prob, [0.2, 0.4], 0.0), [2.0, -1.0])
    with pytest.raises(ValueError):
        exact_riemann_burgers(prob, 0.0, -1.0)


def test_square_wave_matches_riemann_before_interaction():
    x = np.linspace(0, 1, 401, endpoint=False)
    t = 0.2
    sq = exact_square_wave_burgers(x, t)
    fan = exact_riemann_burgers(RiemannProblem(0.0, 1.0, 0.25), x, t)
    shock = exact_riemann_burgers(RiemannProblem(1.0, 0.0, 0.75), x, t)
    near = x < 0.5
    np.testing.assert_allclose(sq[near], fan[near])
    np.testing.assert_allclose(sq[~near], shock[~near])


def test_square_wave_conserves_mass_after_interaction():
    x = (np.arange(20000) + 0.5) / 20000
    for t in (0.25, 1.0, 1.9):  # fan meets the shock at t = 0.5
        assert np.mean(exact_square_wave_burgers(x, t, right=0.5)) == pytest.approx(0.25, abs=1e-3)
    with pytest.raises(ValueError):
        exact_square_wave_burgers(x, 2.5, right=0.5)


def test_fv_unit_cfl_upwind_is_a_shift():
    g = make_grid(32, 4, -1, 1)
    u = np.random.default_rng(0).random(32)
    out = fv_step(u, g, linear_flux(1.0), zero_noise(), g.dx, [0.0])
    np.testing.assert_allclose(out, np.roll(u, 1), atol=1e-15)


def test_fv_rejects_large_cfl():
    g = make_grid(32, 4, -1, 1)
    with pytest.raises(ValueError):
        fv_step(np.ones(32), g, burgers_flux(), zero_noise(), 2 * g.dx, [0.0])


def test_fv_conserves_mass():
    g = make_grid(64, 4, -1, 2)
    u = np.where(g.x_centers < 0.5, 1.0, 0.0)
    p = sample_path(0, 1, 0.5, 8)
    out = fv_solve(u, g, burgers_flux(), zero_noise(), p, 0.5)
    assert np.mean(out) == pytest.approx(np.mean(u), abs=1e-13)


@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8),
       st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_fv_is_monotone(a, b):
    g = make_grid(8, 4, -1, 1)
    u = np.array(a)
    v = np.maximum(u, np.array(b))
    dt = 0.5 * g.dx
    fu = fv_step(u, g, burgers_flux(), zero_noise(), dt, [0.0])
    fv = fv_step(v, g, burgers_flux(), zero_noise(), dt, [0.0])
    assert np.all(fv >= fu - 1e-14)


def test_fv_constant_data_under_flat_omez_noise():
    g = make_grid(16, 4, -1, 2)
    noise = omez_noise(0.3, offset=1.0, amplitude=0.0)
    p = sample_path(5, 1, 0.25, 4)
    out = fv_solve(np.full(16, 0.2), g, burgers_flux(), noise, p, 0.25)
    np.testing.assert_allclose(out, 0.2 + 0.3 * np.sum(p.increments[:, 0]), atol=1e-13)


def test_fv_self_convergence_toward_exact_solution():
    t = 0.25
    errs = []
    for nx in (64, 128, 256):
        g = make_grid(nx, 4, -0.5, 1.5)
        u0 = exact_square_wave_burgers(g.x_centers, 0.0)
        u = fv_solve(u0, g, burgers_flux(), zero_noise(), sample_path(0, 1, t, 4), t)
        errs.append(lp_error(u, exact_square_wave_burgers(g.x_centers, t)))
    assert errs[0] > errs[1] > errs[2]


def test_restrict_and_lp_error():
    np.testing.assert_array_equal(restrict([1.0, 3.0, 5.0, 7.0], 2), [2.0, 6.0])
    with pytest.raises(ValueError):
        restrict([1.0, 2.0, 3.0], 2)
    assert lp_error([1.0, 0.0], [0.0, 0.0]) == 0.5
    assert lp_error([1.0, 0.0], [0.0, 0.0], p=2) == pytest.approx(np.sqrt(0.5))
    assert lp_error([3.0, 0.0], [0.0, 1.0], p=np.inf) == 3.0
    with pytest.raises(ValueError):
        lp_error([1.0], [1.0, 2.0])
