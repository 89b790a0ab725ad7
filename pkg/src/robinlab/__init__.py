"""Impedance (Robin-to-Robin) boundary maps for the 2-D Schrodinger equation
on the unit square, identity checks, and pointwise potential reconstruction
from quadratic-phase exponential solutions."""

__version__ = "0.1.0"

from .domain import (BoundaryTrace, GridFunction, GridSpec, boundary_integral, build_grid,
                     normal_derivative, robin_trace, trace, volume_integral)
from .errors import (AsymptoticRegimeError, ConfigurationError, ConvergenceError,
                     HypothesisViolation, MetadataMismatch, RangeError, RobinLabError,
                     SpectralConditionError, UnsupportedMode)
from .forward import RobinOperator, RobinProblem, eig_sweep, robin_solve, sigma_min
from .impedance import BoundaryOperator, assemble_map, delta_alpha, operator_norm
from .potentials import PotentialSpec, bump, make_potential
