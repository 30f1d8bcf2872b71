"""BGK time loop: semi-Lagrangian stochastic transport composed with exact relaxation.

Also hosts the Picard iteration on the Duhamel representation, which serves
as an independent oracle for the splitting solver on small grids.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .characteristics import DEFAULT_KAPPA, SCHEMES, PhasePoint, backward_displacement, backward_step
from .errors import BlowUp, ConvergenceFailure, SupportViolation
from .kinetic import (KineticMeasure, KineticState, add_increment, density, density_values,
                      indicator_F, kinetic_l2sq, relaxation_step, zero_indicator)
from .mesh import Grid, make_grid
from .models import (FluxModel, InitialData, NoiseModel, make_flux, make_initial, make_noise)
from .wiener import WienerPath

log = logging.getLogger(__name__)

BOUND_TOL = 1e-12


@dataclass
class SolverConfig:
    """Full provenance of one solver run.

    ``eps = inf`` switches relaxation off (pure transport).
    """

    nx: int = 128
    nxi: int = 128
    xi_min: float = -1.0
    xi_max: float = 1.0
    flux: str = "burgers"
    flux_params: dict = field(default_factory=dict)
    noise: str = "zero"
    noise_params: dict = field(default_factory=dict)
    initial: str = "square"
    initial_params: dict = field(default_factory=dict)
    eps: float = 0.01
    dt: float = 0.005
    t_end: float = 0.25
    seed: int = 0
    scheme: str = "ito-em"
    kappa: float = DEFAULT_KAPPA
    interpolation: str = "linear"
    splitting: str = "lie"
    output_every: int = 0
    record_full: bool = False
    check_support: bool = True

    def __post_init__(self) -> None:
        if self.nx < 4 or self.nxi < 4:
            raise ValueError(f"need nx, nxi >= 4, got {self.nx}, {self.nxi}")
        if not self.xi_max > self.xi_min:
            raise ValueError(f"empty velocity box [{self.xi_min}, {self.xi_max}]")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= self.dt * (1 - 1e-12):
            raise ValueError(f"t_end={self.t_end} must be at least dt={self.dt}")
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-8 * max(1.0, steps):
            raise ValueError(f"t_end={self.t_end} is not a whole number of steps dt={self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.splitting not in ("lie", "strang"):
            raise ValueError(f"splitting must be 'lie' or 'strang', got {self.splitting!r}")
        if self.interpolation != "linear":
            raise ValueError("only linear interpolation is supported")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def grid(self) -> Grid:
        return make_grid(self.nx, self.nxi, self.xi_min, self.xi_max)

    def flux_model(self) -> FluxModel:
        return make_flux(self.flux, **self.flux_params)

    def noise_model(self) -> NoiseModel:
        return make_noise(self.noise, **self.noise_params)

    def initial_data(self) -> InitialData:
        return make_initial(self.initial, **self.initial_params)

    def cfl(self) -> float:
        """a_max * dt / dx over the velocity box."""
        grid = self.grid()
        a = self.flux_model().a(np.array([grid.xi_min, grid.xi_max, *grid.xi_centers]))
        return float(np.max(np.abs(a)) * self.dt / grid.dx)

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# diagnostics

DIAGNOSTIC_COLUMNS = ("step", "t", "mass", "u_l1", "u_l2", "u_l4", "f_min", "f_max",
                      "bound_violation", "measure_total", "measure_m2", "support_margin",
                      "kinetic_l2sq")


@dataclass
class Diagnostics:
    rows: list = field(default_factory=list)

    def record(self, step: int, F: KineticState, M: KineticMeasure) -> dict:
        grid = F.grid
        if self.rows and F.time < self.rows[-1]["t"]:
            raise ValueError("diagnostics must be recorded in increasing time")
        u = density(F)
        v = F.values
        row = {
            "step": step,
            "t": float(F.time),
            "mass": float(np.sum(u) * grid.dx),
            "u_l1": float(np.sum(np.abs(u)) * grid.dx),
            "u_l2": float(np.sqrt(np.sum(u ** 2) * grid.dx)),
            "u_l4": float((np.sum(u ** 4) * grid.dx) ** 0.25),
            "f_min": float(np.min(v)),
            "f_max": float(np.max(v)),
            "bound_violation": float(max(np.max(v) - 1.0, -np.min(v), 0.0)),
            "measure_total": M.total_mass,
            "measure_m2": M.moments[1],
            "support_margin": float(min(np.min(u) - grid.xi_min, grid.xi_max - np.max(u))),
            "kinetic_l2sq": kinetic_l2sq(F),
        }
        self.rows.append(row)
        return row

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def table(self) -> tuple[list[str], list[list]]:
        return list(DIAGNOSTIC_COLUMNS), [[r[c] for c in DIAGNOSTIC_COLUMNS] for r in self.rows]


# --------------------------------------------------------------------------
# transport


def interpolate_displaced(values: np.ndarray, grid: Grid, disp_x: np.ndarray, disp_xi: np.ndarray,
                          fill_low: float, fill_high: float) -> np.ndarray:
    """Bilinear evaluation of grid ``values`` at node + displacement.

    Periodic in x.  In xi the data is padded with one ghost cell of
    ``fill_low`` below and ``fill_high`` above; feet further out read the
    same fill.  Displacements are in physical units and not wrapped, so a
    zero or whole-cell displacement lands exactly on a node.
    """
    nx, nxi = grid.shape
    j = np.arange(nx)[:, None]
    m = np.arange(nxi)[None, :]
    sx = j + disp_x / grid.dx
    sxi = m + disp_xi / grid.dxi
    jf = np.floor(sx)
    mf = np.floor(sxi)
    tx = sx - jf
    txi = sxi - mf
    j0 = np.mod(jf.astype(np.int64), nx)
    j1 = np.mod(j0 + 1, nx)
    mf = np.clip(mf, -2, nxi + 1).astype(np.int64)
    p0 = np.clip(mf + 1, 0, nxi + 1)
    p1 = np.clip(mf + 2, 0, nxi + 1)
    padded = np.empty((nx, nxi + 2))
    padded[:, 0] = fill_low
    padded[:, -1] = fill_high
    padded[:, 1:-1] = values
    low = (1.0 - txi) * padded[j0, p0] + txi * padded[j0, p1]
    high = (1.0 - txi) * padded[j1, p0] + txi * padded[j1, p1]
    return (1.0 - tx) * low + tx * high


def _node_points(grid: Grid) -> PhasePoint:
    X, XI = np.meshgrid(grid.x_centers, grid.xi_centers, indexing="ij")
    return PhasePoint(X, XI)


def _monitor_support(values: np.ndarray, grid: Grid, disp_x: np.ndarray, disp_xi: np.ndarray,
                     step: int | None) -> None:
    foot_xi = grid.xi_centers[None, :] + disp_xi
    jn = np.mod(np.rint(np.arange(grid.nx)[:, None] + disp_x / grid.dx).astype(np.int64), grid.nx)
    below = foot_xi < grid.xi_min - 2 * grid.dxi
    above = foot_xi > grid.xi_max + 2 * grid.dxi
    if np.any(below):
        bad = below & (np.abs(values[jn, 0] - 1.0) > 1e-6)
        if np.any(bad):
            raise SupportViolation("transport reads the lower velocity fill where F is not 1", step)
    if np.any(above):
        bad = above & (np.abs(values[jn, -1]) > 1e-6)
        if np.any(bad):
            raise SupportViolation("transport reads the upper velocity fill where F is not 0", step)


def transport_step(F: KineticState, flux: FluxModel, noise: NoiseModel, dt: float, dW,
                   scheme: str = "ito-em", kappa: float = DEFAULT_KAPPA,
                   check_support: bool = True, step: int | None = None) -> KineticState:
    """Semi-Lagrangian step: F'(node) = F(backward foot of node)."""
    grid = F.grid
    nodes = _node_points(grid)
    disp_x, disp_xi = backward_displacement(nodes, flux, noise, dt, dW, scheme, kappa)
    if not (np.all(np.isfinite(disp_x)) and np.all(np.isfinite(disp_xi))):
        raise BlowUp("non-finite characteristic foot", step)
    if check_support:
        _monitor_support(F.values, grid, disp_x, disp_xi, step)
    new = interpolate_displaced(F.values, grid, disp_x, disp_xi, 1.0, 0.0)
    # no-op for in-range data; guards against rounding
    np.clip(new, 0.0, 1.0, out=new)
    return F.with_values(new, F.time + dt)


# --------------------------------------------------------------------------
# time loop


@dataclass
class RunResult:
    times: np.ndarray
    snapshots: np.ndarray          # (n_snapshots, nx) densities
    diagnostics: Diagnostics
    measure: KineticMeasure
    final: KineticState
    states: list | None = None     # full F history when record_full
    increments: list | None = None  # per-step measure increments when record_full


class BGKSolver:
    """Binds a configuration to its grid and models."""

    def __init__(self, cfg: SolverConfig):
        self.cfg = cfg
        self.grid = cfg.grid()
        self.flux = cfg.flux_model()
        self.noise = cfg.noise_model()
        self.initial = cfg.initial_data()

    def initial_state(self) -> KineticState:
        if self.initial.kinetic is not None:
            return KineticState(self.grid, np.asarray(self.initial.kinetic(self.grid), dtype=float), 0.0)
        return indicator_F(self.initial.u0(self.grid.x_centers), self.grid)

    def transport(self, F: KineticState, dW, step: int | None = None) -> KineticState:
        c = self.cfg
        return transport_step(F, self.flux, self.noise, c.dt, dW, c.scheme, c.kappa, c.check_support, step)

    def step(self, F: KineticState, M: KineticMeasure, dW,
             step: int | None = None) -> tuple[KineticState, KineticMeasure, np.ndarray]:
        c = self.cfg
        try:
            if c.splitting == "lie":
                F1 = self.transport(F, dW, step)
                F2, inc = relaxation_step(F1, c.dt, c.eps)
            else:
                Fh, inc = relaxation_step(F, 0.5 * c.dt, c.eps)
                Fh = Fh.with_values(Fh.values, F.time)
                F1 = self.transport(Fh, dW, step)
                F2, inc2 = relaxation_step(F1, 0.5 * c.dt, c.eps)
                F2 = F2.with_values(F2.values, F.time + c.dt)
                inc = inc + inc2
        except SupportViolation as exc:
            if exc.step is None:
                raise SupportViolation(str(exc), step) from None
            raise
        if not np.all(np.isfinite(F2.values)):
            raise BlowUp("non-finite kinetic state", step)
        return F2, add_increment(M, inc), inc

    def run(self, path: WienerPath) -> RunResult:
        c = self.cfg
        n_steps = c.n_steps
        if path.d != self.noise.d:
            raise ValueError(f"path has d={path.d}, noise model needs d={self.noise.d}")
        if abs(path.dt - c.dt) > 1e-9 * c.dt or path.n_steps < n_steps:
            raise ValueError(f"path (n_steps={path.n_steps}, dt={path.dt}) does not cover "
                             f"{n_steps} steps of dt={c.dt}")
        log.info("run: %d steps, CFL=%.3f, eps=%g", n_steps, c.cfl(), c.eps)
        F = self.initial_state()
        M = KineticMeasure.empty(self.grid)
        diag = Diagnostics()
        diag.record(0, F, M)
        times, snaps = [0.0], [density(F)]
        states = [F.values] if c.record_full else None
        incs = [] if c.record_full else None
        for n in range(n_steps):
            F, M, inc = self.step(F, M, path.increments[n], n)
            row = diag.record(n + 1, F, M)
            if row["bound_violation"] > BOUND_TOL:
                raise BlowUp(f"F left [0, 1] by {row['bound_violation']:.3e}", n)
            last = n + 1 == n_steps
            if last or (c.output_every and (n + 1) % c.output_every == 0):
                times.append(F.time)
                snaps.append(density(F))
            if c.record_full:
                states.append(F.values)
                incs.append(inc)
        return RunResult(np.array(times), np.array(snaps), diag, M, F, states, incs)


def bgk_step(F: KineticState, cfg: SolverConfig, dW, M: KineticMeasure) -> tuple[KineticState, KineticMeasure]:
    F2, M2, _ = BGKSolver(cfg).step(F, M, dW)
    return F2, M2


def run(cfg: SolverConfig, path: WienerPath) -> RunResult:
    return BGKSolver(cfg).run(path)


# --------------------------------------------------------------------------
# Picard iteration on the Duhamel representation


@dataclass
class PicardResult:
    times: np.ndarray
    u: np.ndarray                  # (n_steps + 1, nx)
    iterations: int
    diffs: list                    # sup_t L1 change per iteration
    ratios: list                   # successive diff ratios
    converged: bool
    contraction_bound: float


def _periodic_linear(u: np.ndarray, grid: Grid, x: np.ndarray) -> np.ndarray:
    s = x / grid.dx - 0.5
    j = np.floor(s)
    t = s - j
    j0 = np.mod(j.astype(np.int64), grid.nx)
    return (1.0 - t) * u[j0] + t * u[np.mod(j0 + 1, grid.nx)]


def _indicator_at(u_at_x: np.ndarray, xi: np.ndarray, grid: Grid) -> np.ndarray:
    # cell-average profile of 1_{u > xi} centred at xi; equals indicator_values at nodes
    return np.clip((u_at_x - xi) / grid.dxi + 0.5, 0.0, 1.0)


def duhamel_picard_solve(cfg: SolverConfig, path: WienerPath, tol: float = 1e-8,
                         max_iter: int = 500, raise_on_failure: bool = False) -> PicardResult:
    """Fixed point of u -> density(K u), K the discretised Duhamel map.

    F(t_n) = e^{-t_n/eps} F0(psi_{0,n}) + sum_i w_i(n) 1_{u(t_i) > .}(psi_{i,n}),
    where psi_{i,n} is the composite backward flow from t_n to t_i evaluated
    at the grid nodes by repeated backward steps (no interpolation between
    steps) and w_i are exact exponential weights for an integrand linear in
    time on each step.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not math.isfinite(cfg.eps):
        raise ValueError("the Duhamel oracle needs finite eps")
    solver = BGKSolver(cfg)
    grid, flux, noise = solver.grid, solver.flux, solver.noise
    N, dt, eps = cfg.n_steps, cfg.dt, cfg.eps
    if path.d != noise.d or abs(path.dt - dt) > 1e-9 * dt or path.n_steps < N:
        raise ValueError("path does not match the configuration")

    # feet[n][i] = psi_{t_i, t_n}(nodes), i = 0..n
    nodes = _node_points(grid)
    feet: list[list[PhasePoint]] = []
    for n in range(N + 1):
        chain = [nodes]
        q = nodes
        for k in range(n - 1, -1, -1):
            q = backward_step(q, flux, noise, dt, path.increments[k], cfg.scheme, cfg.kappa, step=k)
            chain.append(q)
        feet.append(chain[::-1])

    F0 = solver.initial_state()
    if solver.initial.kinetic is None:
        u0 = solver.initial.u0

        def initial_at(p: PhasePoint) -> np.ndarray:
            return _indicator_at(u0(p.x), p.xi, grid)
    else:
        def initial_at(p: PhasePoint) -> np.ndarray:
            disp_x = p.x - nodes.x
            disp_x = disp_x - np.rint(disp_x)  # shortest periodic displacement
            return interpolate_displaced(F0.values, grid, disp_x, p.xi - nodes.xi, 1.0, 0.0)

    decay = np.exp(-np.arange(N + 1) * dt / eps)
    transported_F0 = [initial_at(feet[n][0]) for n in range(N + 1)]
    r = dt / eps
    E = math.exp(-r)
    alpha = -math.expm1(-r)
    beta = (alpha - r * E) / r  # (1 - E (1 + r)) / r

    def apply_map(u: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        out[0] = density_values(transported_F0[0], grid)
        for n in range(1, N + 1):
            G = [_indicator_at(_periodic_linear(u[i], grid, feet[n][i].x), feet[n][i].xi, grid)
                 for i in range(n + 1)]
            F = decay[n] * transported_F0[n]
            for i in range(n):
                F = F + decay[n - i - 1] * (G[i + 1] * (alpha - beta) + G[i] * beta)
            out[n] = density_values(F, grid)
        return out

    u = np.array([density_values(transported_F0[n], grid) for n in range(N + 1)])
    diffs: list[float] = []
    converged = False
    for _ in range(max_iter):
        u_new = apply_map(u)
        d = float(np.max(np.sum(np.abs(u_new - u), axis=1) * grid.dx))
        diffs.append(d)
        u = u_new
        if d <= tol:
            converged = True
            break
    ratios = [diffs[k] / diffs[k - 1] for k in range(1, len(diffs)) if diffs[k - 1] > 0]
    if not converged and raise_on_failure:
        raise ConvergenceFailure(f"Picard iteration stalled at {diffs[-1]:.3e} after {max_iter} iterations")
    return PicardResult(np.arange(N + 1) * dt, u, len(diffs), diffs, ratios, converged,
                        -math.expm1(-N * dt / eps))


__all__ = [
    "BGKSolver", "Diagnostics", "PicardResult", "RunResult", "SolverConfig", "bgk_step",
    "duhamel_picard_solve", "interpolate_displaced", "run", "transport_step", "zero_indicator",
]
