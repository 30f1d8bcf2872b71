"""Discrete residual of the kinetic weak formulation.

For a test function phi(t, x, xi) with compact velocity support the BGK
solution satisfies

    <F(T), phi(T)> - <F0, phi(0)>
        = int <F, d_t phi + a d_x phi> dt - int <m, d_xi phi> dt
          + sum_k int <F, d_xi(g_k phi)> dbeta_k + 1/2 int <F, d_xi(G^2 d_xi phi)> dt,

where m is the kinetic measure.  The residual assembles every term from a
recorded trajectory: trapezoid rule in time for the deterministic integrals
and left-point sums with the recorded increments for the stochastic one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..mesh import Grid
from ..models import FluxModel, NoiseModel
from ..solver import RunResult
from ..wiener import WienerPath

TWO_PI = 2.0 * np.pi


def _bump(s: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """exp(1 - 1/(1 - s^2)) on (-1, 1) with its first two derivatives."""
    s = np.asarray(s, dtype=float)
    b = np.zeros_like(s)
    db = np.zeros_like(s)
    d2b = np.zeros_like(s)
    m = np.abs(s) < 1.0
    q = 1.0 - s[m] ** 2
    v = np.exp(1.0 - 1.0 / q)
    b[m] = v
    db[m] = v * (-2.0 * s[m] / q ** 2)
    d2b[m] = v * (4.0 * s[m] ** 2 - (2.0 + 6.0 * s[m] ** 2) * q) / q ** 4
    return b, db, d2b


@dataclass(frozen=True)
class TestFunction:
    """phi = (1 + rate t) (1 + cos 2 pi (x - x0)) bump((xi - center)/width)."""

    x0: float = 0.0
    center: float = 0.5
    width: float = 0.4
    rate: float = 0.5

    __test__ = False  # not a pytest class

    def parts(self, t: float, x: np.ndarray, xi: np.ndarray) -> dict:
        T = 1.0 + self.rate * t
        c = 1.0 + np.cos(TWO_PI * (x - self.x0))
        cx = -TWO_PI * np.sin(TWO_PI * (x - self.x0))
        b, db, d2b = _bump((xi - self.center) / self.width)
        w = self.width
        return {
            "phi": T * c * b,
            "dt": self.rate * c * b,
            "dx": T * cx * b,
            "dxi": T * c * db / w,
            "dxixi": T * c * d2b / w ** 2,
        }


TEST_FUNCTIONS = {
    "shock": TestFunction(x0=0.8125, center=0.3, width=0.5),
    "centered": TestFunction(x0=0.5, center=0.0, width=0.6),
    "static": TestFunction(x0=0.25, center=0.3, width=0.5, rate=0.0),
}


@dataclass
class WeakFormTerms:
    boundary: float
    transport: float
    measure: float
    stochastic: float
    ito: float

    def residual(self, include_measure: bool = True) -> float:
        r = self.boundary - self.transport - self.stochastic - self.ito
        if include_measure:
            r += self.measure
        return abs(r)


def weak_form_terms(result: RunResult, grid: Grid, flux: FluxModel, noise: NoiseModel,
                    path: WienerPath, dt: float, phi: TestFunction) -> WeakFormTerms:
    if result.states is None or result.increments is None:
        raise ValueError("weak-form residual needs a trajectory recorded with record_full")
    states, incs = result.states, result.increments
    n_steps = len(incs)
    X, XI = np.meshgrid(grid.x_centers, grid.xi_centers, indexing="ij")
    XE = np.broadcast_to(grid.x_centers[:, None], (grid.nx, grid.nxi))
    EDGE = np.broadcast_to(grid.xi_edges[None, 1:], (grid.nx, grid.nxi))
    cell = grid.dx * grid.dxi
    a = flux.a(XI)
    g, gsq, dgsq = (None, None, None)
    if not noise.is_zero:
        g = noise.g(X, XI)
        dg = noise.dxi_g(X, XI)
        gsq = np.sum(g * g, axis=0)
        dgsq = 2.0 * np.sum(g * dg, axis=0)

    def pair(F, f):
        return float(np.sum(F * f) * cell)

    parts = [phi.parts(n * dt, X, XI) for n in range(n_steps + 1)]
    boundary = pair(states[-1], parts[-1]["phi"]) - pair(states[0], parts[0]["phi"])
    lin = [pair(states[n], parts[n]["dt"] + a * parts[n]["dx"]) for n in range(n_steps + 1)]
    transport = float(dt * (0.5 * lin[0] + sum(lin[1:-1]) + 0.5 * lin[-1]))

    measure = 0.0
    for n in range(n_steps):
        dphi_edge = phi.parts((n + 1) * dt, XE, EDGE)["dxi"]
        measure += float(np.sum(incs[n] * dphi_edge) * grid.dxi)

    stochastic = ito = 0.0
    if g is not None:
        for n in range(n_steps):
            p = parts[n]
            dW = path.increments[n]
            for k in range(noise.d):
                stochastic += pair(states[n], dg[k] * p["phi"] + g[k] * p["dxi"]) * dW[k]
        ito_vals = [0.5 * pair(states[n], dgsq * parts[n]["dxi"] + gsq * parts[n]["dxixi"])
                    for n in range(n_steps + 1)]
        ito = float(dt * (0.5 * ito_vals[0] + sum(ito_vals[1:-1]) + 0.5 * ito_vals[-1]))
    return WeakFormTerms(boundary, transport, measure, stochastic, ito)


def weak_form_residual(result: RunResult, grid: Grid, flux: FluxModel, noise: NoiseModel,
                       path: WienerPath, dt: float, phi: TestFunction,
                       include_measure: bool = True) -> float:
    """Magnitude of the discrete weak-form residual (measure term optional)."""
    return weak_form_terms(result, grid, flux, noise, path, dt, phi).residual(include_measure)
