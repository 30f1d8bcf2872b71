import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochbgk.characteristics import (PhasePoint, backward_step, flow_map, forward_step,
                                      ito_drift_residual)
from stochbgk.errors import BlowUp
from stochbgk.models import NOISES, burgers_flux, cubic_flux, linear_noise, make_noise, nula_noise, omez_noise, zero_noise
from stochbgk.wiener import refine_path, sample_path

BURGERS = burgers_flux()


def _circle(a, b):
    d = np.abs(a - b) % 1.0
    return np.minimum(d, 1.0 - d)


def test_drift_residual_examples(rng):
    x = rng.random(1000)
    xi = rng.uniform(-3, 3, 1000)
    assert np.max(np.abs(ito_drift_residual(nula_noise(0.2), x, xi))) <= 1e-14
    assert np.all(ito_drift_residual(omez_noise(0.1), x, xi) == 0.0)
    assert np.all(ito_drift_residual(nula_noise(0.0), x, xi) == 0.0)


@pytest.mark.parametrize("name", sorted(NOISES))
def test_drift_residual_all_models(name, rng):
    noise = make_noise(name)
    x = rng.random(10_000)
    xi = rng.uniform(-5, 5, 10_000)
    assert np.max(np.abs(ito_drift_residual(noise, x, xi))) <= 1e-12


def test_forward_zero_noise_burgers():
    q = forward_step(PhasePoint.of(0.5, 0.25), BURGERS, zero_noise(), 0.1, [0.0])
    assert q.x == pytest.approx(0.525, abs=1e-15)
    assert q.xi == 0.25


def test_forward_additive_shift():
    const = omez_noise(0.1, offset=1.0, amplitude=0.0)
    q = forward_step(PhasePoint.of(0.5, 0.25), BURGERS, const, 0.1, [0.3])
    assert q.xi == pytest.approx(0.28, abs=1e-15)
    assert q.x == pytest.approx(0.525, abs=1e-15)


def test_backward_zero_noise_burgers():
    q = backward_step(PhasePoint.of(0.525, 0.25), BURGERS, zero_noise(), 0.1, [0.0])
    assert q.x == pytest.approx(0.5, abs=1e-15)
    assert q.xi == 0.25


def test_euler_maruyama_strong_order_against_geometric_brownian_motion():
    sigma, T = 0.2, 1.0
    noise = nula_noise(sigma, modulation=0.0)
    xi0 = np.linspace(0.2, 1.0, 5)
    p = PhasePoint.of(np.zeros_like(xi0), xi0)
    paths = [sample_path(s, 1, T, 16) for s in range(60)]
    hs, errs = [], []
    for _ in range(4):
        e = []
        for k, pa in enumerate(paths):
            q = flow_map(p, BURGERS, noise, pa, 0, pa.n_steps)
            exact = xi0 * np.exp(sigma * pa.increments.sum() - 0.5 * sigma ** 2 * T)
            e.append(np.mean(np.abs(q.xi - exact)))
            paths[k] = refine_path(pa)
        hs.append(T / paths[0].n_steps * 2)
        errs.append(np.mean(e))
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert 0.35 <= order <= 0.75


def test_round_trip_converges(rng):
    noise = nula_noise(0.2)
    p = PhasePoint.of(rng.random(1000), rng.uniform(-1, 1, 1000))
    paths = [sample_path(s, 1, 1.0, 8) for s in range(10)]
    hs, errs = [], []
    for _ in range(4):
        e = []
        for k, pa in enumerate(paths):
            q = flow_map(p, BURGERS, noise, pa, 0, pa.n_steps, "forward")
            r = flow_map(q, BURGERS, noise, pa, 0, pa.n_steps, "backward")
            e.append(max(np.max(_circle(r.x, p.x)), np.max(np.abs(r.xi - p.xi))))
            paths[k] = refine_path(pa)
        hs.append(1.0 / paths[0].n_steps * 2)
        errs.append(np.mean(e))
    assert np.all(np.diff(errs) < 0)
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 0.5


def test_round_trip_without_noise_is_exact(rng):
    p = PhasePoint.of(rng.random(200), rng.uniform(-2, 2, 200))
    pa = sample_path(0, 1, 1.0, 16)
    for flux in (BURGERS, cubic_flux()):
        q = flow_map(p, flux, zero_noise(), pa, 0, 16, "forward")
        r = flow_map(q, flux, zero_noise(), pa, 0, 16, "backward")
        assert np.max(_circle(r.x, p.x)) <= 1e-13
        assert np.array_equal(r.xi, p.xi)


def test_omez_round_trip_error_is_x_coupling_only(rng):
    sigma, dt, dW = 0.1, 0.01, 0.25
    p = PhasePoint.of(rng.random(500), rng.uniform(-1, 1, 500))
    noise = omez_noise(sigma)
    q = forward_step(p, BURGERS, noise, dt, [dW])
    r = backward_step(q, BURGERS, noise, dt, [dW])
    # |g(x0) - g(x1)| <= 2 pi sigma |x1 - x0| with |x1 - x0| <= max|a| dt
    bound = 2 * np.pi * sigma * np.max(np.abs(p.xi)) * dt * abs(dW)
    assert np.max(np.abs(r.xi - p.xi)) <= bound + 1e-15
    const = omez_noise(sigma, offset=1.0, amplitude=0.0)
    r = backward_step(forward_step(p, BURGERS, const, dt, [dW]), BURGERS, const, dt, [dW])
    assert np.max(np.abs(r.xi - p.xi)) <= 1e-15


def test_flow_identity_and_composition(rng):
    noise = nula_noise(0.3, d=2)
    pa = sample_path(5, 2, 1.0, 12)
    p = PhasePoint.of(rng.random(100), rng.uniform(-1, 1, 100))
    same = flow_map(p, BURGERS, noise, pa, 4, 4)
    assert same is p
    for s, r, t in [(0, 5, 12), (2, 2, 9), (3, 11, 11)]:
        whole = flow_map(p, BURGERS, noise, pa, s, t, "forward")
        parts = flow_map(flow_map(p, BURGERS, noise, pa, s, r), BURGERS, noise, pa, r, t)
        assert np.array_equal(whole.x, parts.x) and np.array_equal(whole.xi, parts.xi)
        whole = flow_map(p, BURGERS, noise, pa, s, t, "backward")
        parts = flow_map(flow_map(p, BURGERS, noise, pa, r, t, "backward"), BURGERS, noise, pa, s, r, "backward")
        assert np.array_equal(whole.x, parts.x) and np.array_equal(whole.xi, parts.xi)


def test_flow_rejects_bad_indices():
    pa = sample_path(0, 1, 1.0, 4)
    p = PhasePoint.of(0.1, 0.1)
    with pytest.raises(ValueError):
        flow_map(p, BURGERS, zero_noise(), pa, 3, 2)
    with pytest.raises(ValueError):
        flow_map(p, BURGERS, zero_noise(), pa, 0, 5)
    with pytest.raises(ValueError):
        flow_map(p, BURGERS, zero_noise(), pa, 0, 1, "sideways")


def test_zero_noise_reduces_to_straight_characteristics(rng):
    x0, xi0 = rng.random(50), rng.uniform(-1, 1, 50)
    pa = sample_path(1, 1, 0.5, 10)
    q = flow_map(PhasePoint.of(x0, xi0), BURGERS, zero_noise(), pa, 0, 10)
    assert np.array_equal(q.xi, xi0)
    assert np.max(_circle(q.x, x0 + xi0 * 0.5)) <= 1e-14


@given(st.floats(-3, 3), st.floats(0, 1, exclude_max=True), st.sampled_from(["ito-em", "strat-heun"]))
def test_nula_zero_is_fixed_point(dW, x, scheme):
    noise = nula_noise(0.4, d=1)
    p = PhasePoint.of(x, 0.0)
    assert forward_step(p, BURGERS, noise, 0.1, [dW], scheme).xi == 0.0
    assert backward_step(p, BURGERS, noise, 0.1, [dW], scheme).xi == 0.0


@given(st.floats(-10, 10), st.floats(-2, 2).filter(lambda v: v != 0))
def test_backward_step_preserves_sign_for_nula(dW, xi):
    q = backward_step(PhasePoint.of(0.3, xi), BURGERS, nula_noise(0.5), 0.1, [dW])
    assert np.sign(q.xi) == np.sign(xi)


def test_blow_up_is_reported():
    with pytest.raises(BlowUp):
        forward_step(PhasePoint.of(0.1, 1.0), BURGERS, linear_noise(1.0), 0.1, [np.inf], step=3)


def test_unknown_scheme():
    with pytest.raises(ValueError):
        forward_step(PhasePoint.of(0.1, 1.0), BURGERS, zero_noise(), 0.1, [0.0], scheme="rk4")


def test_heun_and_em_agree_to_first_order(rng):
    p = PhasePoint.of(rng.random(100), rng.uniform(-1, 1, 100))
    noise = nula_noise(0.2)
    diffs = []
    pa = sample_path(2, 1, 1.0, 8)
    for _ in range(3):
        a = flow_map(p, BURGERS, noise, pa, 0, pa.n_steps)
        b = flow_map(p, BURGERS, noise, pa, 0, pa.n_steps, scheme="strat-heun")
        diffs.append(np.sqrt(np.mean((a.xi - b.xi) ** 2)))
        pa = refine_path(pa)
    assert diffs[-1] < diffs[0]
