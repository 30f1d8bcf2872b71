"""Seeded Brownian increments with Brownian-bridge refinement.

Normals are produced from a counter-based generator (Philox) whose key is
derived from ``(seed, level, replica)``.  Within a key the normal with flat
index ``q = step * d + component`` is built by Box-Muller from raw words
``2q`` and ``2q + 1``, so every value is a pure function of its logical
coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_TWO_POW_M53 = 2.0 ** -53


def _philox_key(seed: int, level: int, replica: int) -> np.ndarray:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(level), int(replica)))
    return ss.generate_state(2, dtype=np.uint64)


def keyed_normals(seed: int, level: int, replica: int, count: int) -> np.ndarray:
    """First ``count`` standard normals of the stream keyed by (seed, level, replica)."""
    bg = np.random.Philox(key=_philox_key(seed, level, replica))
    raw = bg.random_raw(2 * count).reshape(count, 2)
    # 53-bit uniforms strictly inside (0, 1)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_POW_M53
    return np.sqrt(-2.0 * np.log(u[:, 0])) * np.cos(2.0 * np.pi * u[:, 1])


@dataclass(frozen=True)
class WienerPath:
    d: int
    t_end: float
    n_steps: int
    increments: np.ndarray = field(repr=False, compare=False)
    seed: int = 0
    level: int = 0
    replica: int = 0

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def values(self) -> np.ndarray:
        """W at the step times, shape (n_steps + 1, d), starting from 0."""
        out = np.zeros((self.n_steps + 1, self.d))
        np.cumsum(self.increments, axis=0, out=out[1:])
        return out

    def provenance(self) -> dict:
        return {"seed": self.seed, "level": self.level, "replica": self.replica,
                "n_steps": self.n_steps, "d": self.d, "t_end": self.t_end}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def sample_path(seed: int, d: int, t_end: float, n_steps: int, replica: int = 0) -> WienerPath:
    """i.i.d. N(0, t_end/n_steps) increments, shape (n_steps, d)."""
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps}")
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if not (np.isfinite(t_end) and t_end > 0):
        raise ValueError(f"t_end must be positive, got {t_end}")
    n_steps, d = int(n_steps), int(d)
    z = keyed_normals(seed, 0, replica, n_steps * d).reshape(n_steps, d)
    inc = np.sqrt(t_end / n_steps) * z
    return WienerPath(d, float(t_end), n_steps, _frozen(inc), int(seed), 0, int(replica))


def refine_path(path: WienerPath) -> WienerPath:
    """Split every increment in two by a Brownian bridge conditioned on the parent."""
    level = path.level + 1
    z = keyed_normals(path.seed, level, path.replica, path.n_steps * path.d).reshape(path.n_steps, path.d)
    first = 0.5 * path.increments + np.sqrt(path.dt / 4.0) * z
    second = path.increments - first
    inc = np.empty((2 * path.n_steps, path.d))
    inc[0::2] = first
    inc[1::2] = second
    return WienerPath(path.d, path.t_end, 2 * path.n_steps, _frozen(inc), path.seed, level, path.replica)


def coarsen_path(path: WienerPath) -> WienerPath:
    """Sum adjacent increment pairs (inverse of refine_path up to rounding)."""
    if path.n_steps % 2:
        raise ValueError("cannot coarsen a path with an odd step count")
    inc = path.increments[0::2] + path.increments[1::2]
    return WienerPath(path.d, path.t_end, path.n_steps // 2, _frozen(inc), path.seed,
                      max(path.level - 1, 0), path.replica)


def path_at_resolution(path: WienerPath, n_steps: int) -> WienerPath:
    """Refine or coarsen dyadically until the path has ``n_steps`` increments."""
    ratio = n_steps / path.n_steps
    p = path
    if ratio >= 1:
        while p.n_steps < n_steps:
            p = refine_path(p)
    else:
        while p.n_steps > n_steps:
            p = coarsen_path(p)
    if p.n_steps != n_steps:
        raise ValueError(f"{n_steps} steps is not a dyadic multiple of {path.n_steps}")
    return p
