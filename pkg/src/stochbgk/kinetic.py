"""Kinetic state F, equilibrium profiles, density, exact relaxation and the kinetic measure.

Indicators are cell averages: on a velocity cell [l, l + dxi] the value of
1_{u > xi} is clip((u - l)/dxi, 0, 1).  The sum over a column therefore
telescopes, and density(indicator_F(u)) reproduces u up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import SupportViolation
from .mesh import Grid


@dataclass(frozen=True)
class KineticState:
    grid: Grid
    values: np.ndarray = field(repr=False)
    time: float = 0.0

    def with_values(self, values: np.ndarray, time: float | None = None) -> "KineticState":
        return KineticState(self.grid, values, self.time if time is None else time)


@dataclass
class KineticMeasure:
    """Time-accumulated kinetic measure, one value per (x cell, right velocity edge).

    ``cumulative[j, m]`` holds the measure mass of x-cell j evaluated at the
    right edge of velocity cell m (units u * x * t per unit xi).
    """

    grid: Grid
    cumulative: np.ndarray = field(repr=False)
    total_mass: float = 0.0
    moments: dict = field(default_factory=lambda: {0: 0.0, 1: 0.0})

    @classmethod
    def empty(cls, grid: Grid) -> "KineticMeasure":
        return cls(grid, np.zeros(grid.shape))


def zero_indicator(grid: Grid) -> np.ndarray:
    """Cell averages of 1_{0 > xi}, length nxi."""
    return np.clip((0.0 - grid.xi_edges[:-1]) / grid.dxi, 0.0, 1.0)


def _check_box(u: np.ndarray, grid: Grid) -> None:
    if not np.all(np.isfinite(u)):
        raise SupportViolation("non-finite density")
    if np.any(u <= grid.xi_min) or np.any(u >= grid.xi_max):
        lo, hi = float(np.min(u)), float(np.max(u))
        raise SupportViolation(
            f"density range [{lo:.6g}, {hi:.6g}] leaves the velocity box ({grid.xi_min}, {grid.xi_max})")


def indicator_values(u, grid: Grid) -> np.ndarray:
    """Cell-averaged 1_{u > xi} for each entry of ``u``; trailing axis is velocity."""
    u = np.asarray(u, dtype=float)
    _check_box(u, grid)
    return np.clip((u[..., np.newaxis] - grid.xi_edges[:-1]) / grid.dxi, 0.0, 1.0)


def equilibrium_chi(u: float, grid: Grid) -> np.ndarray:
    """Cell-averaged chi_u = 1_{0<xi<u} - 1_{u<xi<0}."""
    return indicator_values(np.float64(u), grid) - zero_indicator(grid)


def indicator_F(u_field, grid: Grid, time: float = 0.0) -> KineticState:
    """Equilibrium state 1_{u(x) > xi} for a density field of length nx."""
    u = np.asarray(u_field, dtype=float)
    if u.shape != (grid.nx,):
        raise ValueError(f"density field must have shape ({grid.nx},), got {u.shape}")
    return KineticState(grid, indicator_values(u, grid), time)


def density_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    return np.sum(values - zero_indicator(grid), axis=-1) * grid.dxi


def density(F: KineticState) -> np.ndarray:
    """u(x) = sum over xi of (F - 1_{0>xi}) dxi."""
    return density_values(F.values, F.grid)


def kinetic_l2sq(F: KineticState) -> float:
    """||F - 1_{0>xi}||^2 over the torus times the velocity box."""
    f = F.values - zero_indicator(F.grid)
    return float(np.sum(f * f) * F.grid.dx * F.grid.dxi)


def relaxation_weight(dt: float, eps: float) -> float:
    """1 - exp(-dt/eps); zero when eps is infinite (relaxation off)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if np.isinf(eps):
        return 0.0
    return float(-np.expm1(-dt / eps))


def _measure_increment(gap: np.ndarray, w: float, grid: Grid) -> np.ndarray:
    # gap = I_u - F; its running sum is >= 0 because gap >= 0 below u and <= 0 above
    return w * np.cumsum(gap, axis=-1) * grid.dxi * grid.dx


def relaxation_step(F: KineticState, dt: float, eps: float) -> tuple[KineticState, np.ndarray]:
    """Exact solution of dF/dt = (1_{u>xi} - F)/eps over dt with u frozen.

    Returns the relaxed state and the kinetic-measure increment of the step,
    (1/eps) int_0^dt int_{-inf}^{xi} (1_{u>zeta} - F(s, zeta)) dzeta ds, which
    is evaluated in closed form because F relaxes exponentially.
    """
    w = relaxation_weight(dt, eps)
    grid = F.grid
    if w == 0.0:
        return F.with_values(F.values.copy(), F.time + dt), np.zeros(grid.shape)
    u = density(F)
    gap = indicator_values(u, grid) - F.values
    new = F.values + w * gap
    return F.with_values(new, F.time + dt), _measure_increment(gap, w, grid)


def add_increment(M: KineticMeasure, increment: np.ndarray) -> KineticMeasure:
    grid = M.grid
    cum = M.cumulative + increment
    edges = grid.xi_edges[1:]
    total = M.total_mass + float(np.sum(increment) * grid.dxi)
    moments = {p: M.moments.get(p, 0.0) + float(np.sum(increment * np.abs(edges) ** (2 * p)) * grid.dxi)
               for p in (0, 1)}
    return KineticMeasure(grid, cum, total, moments)


def accumulate_measure(F: KineticState, dt: float, eps: float, M: KineticMeasure) -> KineticMeasure:
    """Add the measure produced by relaxing F over dt (pre-relaxation F and u)."""
    w = relaxation_weight(dt, eps)
    if w == 0.0:
        return KineticMeasure(M.grid, M.cumulative.copy(), M.total_mass, dict(M.moments))
    gap = indicator_values(density(F), F.grid) - F.values
    return add_increment(M, _measure_increment(gap, w, F.grid))
