"""Point-vortex dynamics in shallow lakes with variable bathymetry."""

from .bathymetry import Constant, Exponential, LinearSlope, PiecewiseConstant, Sampled, sample_bathymetry
from .dynamics import SimulationContext, Trajectory, VortexSystem, hamiltonian, simulate, vortex_velocities
from .elliptic import assemble_lb, green_column, green_tilde_column, solve_dirichlet
from .errors import ConfigError, DomainError, InputError, LakeVortexError, NumericalError
from .geometry import Circle, Polygon, Rectangle
from .grid import Domain, build_grid, island_loops, point_loop
from .harmonic import harmonic_measures

__version__ = "0.1.0"
