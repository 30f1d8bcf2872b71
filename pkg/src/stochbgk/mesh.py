"""Periodic spatial grid on the unit torus and truncated velocity grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Cell-centred grid on T^1 x [xi_min, xi_max].

    Spatial cells have centres ``(j + 1/2) dx``; velocity cells have centres
    ``xi_min + (m + 1/2) dxi``.  Velocity values below ``xi_min`` are treated
    as F = 1 and above ``xi_max`` as F = 0 by every consumer.
    """

    nx: int
    nxi: int
    xi_min: float
    xi_max: float
    dim: int = 1
    dx: float = field(init=False)
    dxi: float = field(init=False)
    x_centers: np.ndarray = field(init=False, repr=False, compare=False)
    xi_centers: np.ndarray = field(init=False, repr=False, compare=False)
    xi_edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        dx = 1.0 / self.nx
        dxi = (self.xi_max - self.xi_min) / self.nxi
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dxi", dxi)
        xc = (np.arange(self.nx) + 0.5) * dx
        edges = self.xi_min + np.arange(self.nxi + 1) * dxi
        edges[-1] = self.xi_max
        xic = self.xi_min + (np.arange(self.nxi) + 0.5) * dxi
        for arr in (xc, edges, xic):
            arr.setflags(write=False)
        object.__setattr__(self, "x_centers", xc)
        object.__setattr__(self, "xi_edges", edges)
        object.__setattr__(self, "xi_centers", xic)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nxi)

    def xi_quadrature(self, values: np.ndarray) -> np.ndarray:
        """Midpoint rule over the last (velocity) axis."""
        return np.sum(values, axis=-1) * self.dxi

    def x_quadrature(self, values: np.ndarray) -> np.ndarray:
        return np.sum(values, axis=0) * self.dx

    def to_dict(self) -> dict:
        return {"nx": self.nx, "nxi": self.nxi, "xi_min": self.xi_min, "xi_max": self.xi_max}


def make_grid(nx: int, nxi: int, xi_min: float, xi_max: float) -> Grid:
    """Build a 1-D periodic grid with a velocity box that must contain 0."""
    if int(nx) != nx or int(nxi) != nxi:
        raise ValueError("cell counts must be integers")
    if nx < 4 or nxi < 4:
        raise ValueError(f"need nx >= 4 and nxi >= 4, got nx={nx}, nxi={nxi}")
    if not (np.isfinite(xi_min) and np.isfinite(xi_max)):
        raise ValueError("velocity box endpoints must be finite")
    if not (xi_min < 0.0 < xi_max):
        raise ValueError(f"velocity box [{xi_min}, {xi_max}] must contain 0 in its interior")
    return Grid(int(nx), int(nxi), float(xi_min), float(xi_max))


def wrap_x(grid: Grid, x) -> np.ndarray:
    """Map coordinates onto [0, 1)."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite coordinate cannot be wrapped onto the torus")
    w = np.mod(x, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(w >= 1.0, 0.0, w)
