"""Reference solutions: exact Burgers Riemann/square-wave solutions and a
finite-volume Engquist-Osher scheme with an Ito noise sub-step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Grid
from .models import FluxModel, NoiseModel
from .wiener import WienerPath, path_at_resolution


@dataclass(frozen=True)
class RiemannProblem:
    u_left: float
    u_right: float
    x0: float = 0.0


def exact_riemann_burgers(prob: RiemannProblem, x, t: float) -> np.ndarray:
    """Entropy solution of u_t + (u^2/2)_x = 0 with a single jump on the real line."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    x = np.asarray(x, dtype=float)
    ul, ur = float(prob.u_left), float(prob.u_right)
    if t == 0:
        return np.where(x < prob.x0, ul, ur)
    s = x - prob.x0
    if ul > ur:
        speed = 0.5 * (ul + ur)
        return np.where(s < speed * t, ul, ur)
    return np.where(s < ul * t, ul, np.where(s > ur * t, ur, s / t))


def exact_square_wave_burgers(x, t: float, low: float = 0.0, high: float = 1.0,
                              left: float = 0.25, right: float = 0.75) -> np.ndarray:
    """Periodic Burgers solution from u0 = high on [left, right), low elsewhere (high > low).

    A rarefaction leaves ``left`` and a shock leaves ``right``; after the fan
    head meets the shock at t* = 2 (right - left)/(high - low) the shock
    decays like a square root.  Valid until the shock reaches the fan tail
    again one period later.
    """
    if not high > low:
        raise ValueError("need high > low")
    x = np.asarray(x, dtype=float)
    h = high - low
    # Galilean shift: solve with states (0, h), then move by low * t
    y = np.mod(x - low * t - left, 1.0)  # distance from fan tail
    if t == 0:
        return np.where(y < right - left, high, low)
    L = right - left
    t_star = 2.0 * L / h
    if t <= t_star:
        shock = L + 0.5 * h * t
        fan_head = h * t
        v = np.where(y < fan_head, y / t, np.where(y < shock, h, 0.0))
    else:
        shock = np.sqrt(2.0 * h * L * t)
        if shock >= 1.0:
            raise ValueError("shock has wrapped around the torus; no closed form implemented")
        v = np.where(y < shock, y / t, 0.0)
    return low + v


def _eo_flux(u: np.ndarray, flux: FluxModel) -> np.ndarray:
    # numerical flux at the right face of every cell
    return flux.A_plus(u) + flux.A_minus(np.roll(u, -1))


def fv_step(u: np.ndarray, grid: Grid, flux: FluxModel, noise: NoiseModel, dt: float, dW) -> np.ndarray:
    """Engquist-Osher conservative update followed by u += sum_k g_k(x, u) dW_k."""
    u = np.asarray(u, dtype=float)
    cfl = float(np.max(np.abs(flux.a(u)))) * dt / grid.dx
    if cfl > 1.0 + 1e-12:
        raise ValueError(f"CFL number {cfl:.4f} exceeds 1")
    F = _eo_flux(u, flux)
    v = u - (dt / grid.dx) * (F - np.roll(F, 1))
    dW = np.asarray(dW, dtype=float)
    if np.any(dW != 0.0):
        g = noise.g(grid.x_centers, v)
        v = v + np.tensordot(dW, g, axes=(0, 0))
    return v


def fv_solve(u0: np.ndarray, grid: Grid, flux: FluxModel, noise: NoiseModel, path: WienerPath,
             t_end: float, cfl: float = 0.5, a_max: float | None = None) -> np.ndarray:
    """March fv_step to t_end on a dyadic refinement of ``path`` fine enough for ``cfl``."""
    if a_max is None:
        a_max = float(np.max(np.abs(flux.a(np.array([grid.xi_min, grid.xi_max])))))
    steps_needed = t_end * max(a_max, 1e-300) / (cfl * grid.dx)
    n_base = int(round(t_end / path.dt))
    n = n_base
    while n < steps_needed:
        n *= 2
    p = path_at_resolution(path, path.n_steps * (n // n_base))
    u = np.asarray(u0, dtype=float).copy()
    for k in range(n):
        u = fv_step(u, grid, flux, noise, p.dt, p.increments[k])
    return u


def restrict(u_fine: np.ndarray, factor: int) -> np.ndarray:
    """Cell averages onto a grid ``factor`` times coarser."""
    u_fine = np.asarray(u_fine, dtype=float)
    if u_fine.size % factor:
        raise ValueError("fine grid size is not a multiple of the factor")
    return u_fine.reshape(-1, factor).mean(axis=1)


def lp_error(u1, u2, p: float = 1.0, dx: float | None = None) -> float:
    """(sum |u1 - u2|^p dx)^(1/p) on the unit torus."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != u2.shape:
        raise ValueError(f"grid mismatch: {u1.shape} vs {u2.shape}")
    if p < 1:
        raise ValueError("p must be >= 1")
    if dx is None:
        dx = 1.0 / u1.shape[0]
    diff = np.abs(u1 - u2)
    if np.isinf(p):
        return float(np.max(diff))
    return float((np.sum(diff ** p) * dx) ** (1.0 / p))
