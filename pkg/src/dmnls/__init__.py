"""Spectral simulator and estimate probes for dispersion-managed NLS."""

__version__ = "0.1.0"

from .spectral import Field, Grid, Trajectory, make_grid, make_ladder  # noqa: E402,F401
from .nonlinearity import NonlinearityParams, averaged_nonlinearity  # noqa: E402,F401
from .integrators import EvolutionParams, picard_solve, solve_averaged, solve_original  # noqa: E402,F401
