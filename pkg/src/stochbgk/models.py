"""Flux and noise coefficient models with analytic derivatives.

Every model is vectorised: callables accept numpy arrays (broadcastable
``x`` and ``xi``) and return arrays.  Noise coefficients are returned with a
leading axis of length ``d``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mesh import Grid

TWO_PI = 2.0 * np.pi


class NoiseClass(str, enum.Enum):
    NULA = "nula"    # g_k(x, 0) = 0
    OMEZ = "omez"    # G^2 bounded
    OTHER = "other"


@dataclass(frozen=True)
class FluxModel:
    name: str
    A: Callable[[np.ndarray], np.ndarray]
    a: Callable[[np.ndarray], np.ndarray]
    # Engquist-Osher split: A_plus(u) = int_0^u max(a, 0), A_minus(u) = int_0^u min(a, 0)
    A_plus: Callable[[np.ndarray], np.ndarray]
    A_minus: Callable[[np.ndarray], np.ndarray]
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NoiseModel:
    name: str
    d: int
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dxi_g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    noise_class: NoiseClass
    c_bound: float | None = None
    params: dict = field(default_factory=dict)

    @property
    def is_zero(self) -> bool:
        return bool(self.params.get("sigma", 1.0) == 0.0)


@dataclass(frozen=True)
class InitialData:
    """Initial density profile, optionally with an explicit kinetic field.

    ``kinetic`` (when given) maps a Grid to the initial F values; otherwise
    the solver starts from the sharp indicator of ``u0``.
    """

    u0: Callable[[np.ndarray], np.ndarray]
    description: str
    kinetic: Callable[[Grid], np.ndarray] | None = None
    params: dict = field(default_factory=dict)


def flux_velocity(model: FluxModel, xi) -> np.ndarray:
    """Transport coefficient a(xi)."""
    return model.a(np.asarray(xi, dtype=float))


def noise_eval(model: NoiseModel, x, xi) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(g, Gsq, dxi_Gsq)`` at the given points.

    ``g`` carries a leading axis of length ``d``; ``Gsq = sum_k g_k^2`` and
    ``dxi_Gsq = 2 sum_k g_k dxi g_k``.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    g = model.g(x, xi)
    dg = model.dxi_g(x, xi)
    return g, np.sum(g * g, axis=0), 2.0 * np.sum(g * dg, axis=0)


# --------------------------------------------------------------------------
# flux catalog


def linear_flux(c: float = 1.0) -> FluxModel:
    c = float(c)
    return FluxModel(
        name="linear",
        A=lambda u: c * np.asarray(u, dtype=float),
        a=lambda u: np.full_like(np.asarray(u, dtype=float), c),
        A_plus=lambda u: max(c, 0.0) * np.asarray(u, dtype=float),
        A_minus=lambda u: min(c, 0.0) * np.asarray(u, dtype=float),
        params={"c": c},
    )


def burgers_flux() -> FluxModel:
    return FluxModel(
        name="burgers",
        A=lambda u: 0.5 * np.asarray(u, dtype=float) ** 2,
        a=lambda u: np.asarray(u, dtype=float) * 1.0,
        A_plus=lambda u: 0.5 * np.maximum(u, 0.0) ** 2,
        A_minus=lambda u: 0.5 * np.minimum(u, 0.0) ** 2,
    )


def cubic_flux() -> FluxModel:
    # a = u^2 >= 0, so the whole flux is upwinded from the left
    return FluxModel(
        name="cubic",
        A=lambda u: np.asarray(u, dtype=float) ** 3 / 3.0,
        a=lambda u: np.asarray(u, dtype=float) ** 2,
        A_plus=lambda u: np.asarray(u, dtype=float) ** 3 / 3.0,
        A_minus=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
    )


FLUXES: dict[str, Callable[..., FluxModel]] = {
    "linear": linear_flux,
    "burgers": burgers_flux,
    "cubic": cubic_flux,
}


def make_flux(name: str, **params) -> FluxModel:
    try:
        factory = FLUXES[name]
    except KeyError:
        raise ValueError(f"unknown flux model {name!r}; choose from {sorted(FLUXES)}") from None
    return factory(**params)


# --------------------------------------------------------------------------
# noise catalog


def _modes(x: np.ndarray, d: int, fn) -> np.ndarray:
    k = np.arange(1, d + 1).reshape((d,) + (1,) * np.ndim(x))
    return fn(TWO_PI * k * x)


def nula_noise(sigma: float = 0.2, modulation: float = 0.5, d: int = 1,
               noise_class: NoiseClass | str = NoiseClass.NULA) -> NoiseModel:
    """g_k(x, xi) = (sigma / sqrt d) * xi * (1 + modulation * sin(2 pi k x))."""
    s = float(sigma) / np.sqrt(d)
    mod = float(modulation)

    def h(x):
        return 1.0 + mod * _modes(np.asarray(x, dtype=float), d, np.sin)

    def g(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        return s * xi * h(x)

    def dxi_g(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        return s * h(x) * np.ones_like(xi)

    return NoiseModel("nula", d, g, dxi_g, NoiseClass(noise_class), None,
                      {"sigma": float(sigma), "modulation": mod, "d": d})


def omez_noise(sigma: float = 0.1, offset: float = 0.0, amplitude: float = 1.0, d: int = 1,
               noise_class: NoiseClass | str = NoiseClass.OMEZ) -> NoiseModel:
    """g_k(x, xi) = (sigma / sqrt d) * (offset + amplitude * cos(2 pi k x)), independent of xi."""
    s = float(sigma) / np.sqrt(d)
    off, amp = float(offset), float(amplitude)

    def g(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        return s * (off + amp * _modes(x, d, np.cos)) * np.ones_like(xi)

    def dxi_g(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        return np.zeros((d,) + np.shape(x))

    bound = float(sigma) ** 2 * (abs(off) + abs(amp)) ** 2
    return NoiseModel("omez", d, g, dxi_g, NoiseClass(noise_class), bound,
                      {"sigma": float(sigma), "offset": off, "amplitude": amp, "d": d})


def linear_noise(sigma: float = 0.1, noise_class: NoiseClass | str = NoiseClass.OTHER) -> NoiseModel:
    """g(x, xi) = sigma * (1 + xi); satisfies neither special hypothesis."""
    s = float(sigma)

    def g(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        return (s * (1.0 + xi))[np.newaxis]

    def dxi_g(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        return np.full((1,) + np.shape(x), s)

    return NoiseModel("linear", 1, g, dxi_g, NoiseClass(noise_class), None, {"sigma": s})


def zero_noise(d: int = 1) -> NoiseModel:
    def g(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
        return np.zeros((d,) + np.shape(x))

    return NoiseModel("zero", d, g, g, NoiseClass.NULA, 0.0, {"sigma": 0.0, "d": d})


NOISES: dict[str, Callable[..., NoiseModel]] = {
    "nula": nula_noise,
    "omez": omez_noise,
    "linear": linear_noise,
    "zero": zero_noise,
}


def make_noise(name: str, **params) -> NoiseModel:
    try:
        factory = NOISES[name]
    except KeyError:
        raise ValueError(f"unknown noise model {name!r}; choose from {sorted(NOISES)}") from None
    if "d" in params:
        params["d"] = int(params["d"])
    return factory(**params)


@dataclass
class NoiseClassReport:
    declared: NoiseClass
    passed: bool
    max_violation: float
    max_gsq: float
    detail: str


def verify_noise_class(model: NoiseModel, grid: Grid, samples: int) -> NoiseClassReport:
    """Check the declared noise class on a (samples x samples) lattice.

    A mismatch is reported, never repaired.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    x = np.arange(samples) / samples
    xi = np.linspace(grid.xi_min, grid.xi_max, samples + 2)
    X, XI = np.meshgrid(x, xi, indexing="ij")
    _, gsq, _ = noise_eval(model, X, XI)
    max_gsq = float(np.max(gsq))

    if model.noise_class is NoiseClass.NULA:
        g0 = model.g(x, np.zeros_like(x))
        viol = float(np.max(np.abs(g0)))
        ok = viol <= 1e-12
        detail = f"max |g_k(x, 0)| = {viol:.3e}"
    elif model.noise_class is NoiseClass.OMEZ:
        bound = np.inf if model.c_bound is None else model.c_bound
        viol = max(0.0, max_gsq - bound)
        # rounding slack relative to the bound itself
        ok = viol <= 1e-12 * max(1.0, bound)
        detail = f"max G^2 = {max_gsq:.6g} against declared bound {bound:.6g}"
    else:
        ratio = float(np.max(gsq / (1.0 + XI ** 2)))
        viol, ok = 0.0, True
        detail = f"no class invariant; max G^2/(1+xi^2) = {ratio:.6g}"
    return NoiseClassReport(model.noise_class, ok, viol, max_gsq, detail)


# --------------------------------------------------------------------------
# initial data


def _smooth_bump(s: np.ndarray) -> np.ndarray:
    """C-infinity bump on (-1, 1), equal to 1 at 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def square_wave(high: float = 1.0, low: float = 0.0, left: float = 0.25, right: float = 0.75) -> InitialData:
    def u0(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= left) & (x < right), high, low)

    return InitialData(u0, f"square wave {high} on [{left}, {right}), else {low}",
                       params={"high": high, "low": low, "left": left, "right": right})


def sine_wave(mean: float = 0.5, amplitude: float = 0.3, mode: int = 1) -> InitialData:
    def u0(x):
        return mean + amplitude * np.sin(TWO_PI * mode * np.asarray(x, dtype=float))

    return InitialData(u0, f"{mean} + {amplitude} sin(2 pi {mode} x)",
                       params={"mean": mean, "amplitude": amplitude, "mode": mode})


def constant(value: float = 0.0) -> InitialData:
    return InitialData(lambda x: np.full_like(np.asarray(x, dtype=float), value),
                       f"constant {value}", params={"value": value})


def riemann(left: float = 1.0, right: float = 0.0, x0: float = 0.5) -> InitialData:
    """Periodic Riemann data: ``left`` on [0, x0), ``right`` on [x0, 1)."""
    def u0(x):
        x = np.asarray(x, dtype=float)
        return np.where(x < x0, left, right)

    return InitialData(u0, f"riemann {left}|{right} at {x0}",
                       params={"left": left, "right": right, "x0": x0})


def random_field(seed: int = 0, modes: int = 4, mean: float = 0.0, amplitude: float = 0.3) -> InitialData:
    """Seeded smooth random field built from a few Fourier modes."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    coef = rng.normal(size=(modes, 2)) / np.arange(1, modes + 1)[:, None]
    coef *= amplitude / np.sum(np.abs(coef))

    def u0(x):
        x = np.asarray(x, dtype=float)
        out = np.full_like(x, mean)
        for k in range(modes):
            out = out + coef[k, 0] * np.cos(TWO_PI * (k + 1) * x) + coef[k, 1] * np.sin(TWO_PI * (k + 1) * x)
        return out

    return InitialData(u0, f"random field seed={seed}", params={"seed": seed, "modes": modes,
                                                                 "mean": mean, "amplitude": amplitude})


def kinetic_bump(amplitude: float = 0.5, center: float = 0.5, width: float = 0.3,
                 modulation: float = 0.5) -> InitialData:
    """F0 = 1_{0>xi} + f0 with a smooth, compactly supported f0 >= 0.

    f0(x, xi) = amplitude * bump((xi - center)/width) * (1 + modulation cos 2 pi x) / (1 + |modulation|).
    The support must lie in xi > 0 so that F0 stays in [0, 1].
    """
    if center - width < 0.0:
        raise ValueError("kinetic bump support must lie in xi > 0")
    if not 0.0 <= amplitude <= 1.0:
        raise ValueError("kinetic bump amplitude must lie in [0, 1]")

    def f0(x, xi):
        xf = (1.0 + modulation * np.cos(TWO_PI * x)) / (1.0 + abs(modulation))
        return amplitude * _smooth_bump((xi - center) / width) * xf

    def kinetic(grid: Grid) -> np.ndarray:
        from .kinetic import zero_indicator  # local import: kinetic depends on models
        X, XI = np.meshgrid(grid.x_centers, grid.xi_centers, indexing="ij")
        return zero_indicator(grid)[np.newaxis, :] + f0(X, XI)

    def u0(x):
        # density of F0 by fine quadrature in xi
        s = np.linspace(-1.0, 1.0, 2001)
        w = np.trapezoid(_smooth_bump(s), s) * width
        xf = (1.0 + modulation * np.cos(TWO_PI * np.asarray(x, dtype=float))) / (1.0 + abs(modulation))
        return amplitude * w * xf

    return InitialData(u0, "kinetic bump", kinetic=kinetic,
                       params={"amplitude": amplitude, "center": center, "width": width,
                               "modulation": modulation})


INITIAL: dict[str, Callable[..., InitialData]] = {
    "square": square_wave,
    "sine": sine_wave,
    "constant": constant,
    "riemann": riemann,
    "random": random_field,
    "kinetic_bump": kinetic_bump,
}


def make_initial(name: str, **params) -> InitialData:
    try:
        factory = INITIAL[name]
    except KeyError:
        raise ValueError(f"unknown initial data {name!r}; choose from {sorted(INITIAL)}") from None
    return factory(**params)
