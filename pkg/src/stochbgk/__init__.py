"""Stochastic BGK approximation of scalar conservation laws with multiplicative noise."""

__version__ = "0.1.0"

from .mesh import Grid, make_grid, wrap_x  # noqa: E402
from .solver import BGKSolver, SolverConfig, bgk_step, duhamel_picard_solve, run  # noqa: E402
from .wiener import WienerPath, refine_path, sample_path  # noqa: E402

__all__ = ["BGKSolver", "Grid", "SolverConfig", "bgk_step", "WienerPath", "duhamel_picard_solve", "make_grid",
           "refine_path", "run", "sample_path", "wrap_x", "__version__"]
