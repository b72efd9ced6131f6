"""Divergence-free spectral-Galerkin solver for incompressible MHD on the
reference square and cube."""

from .bases import basis_check, make_space
from .config import ConfigError, RunConfig, load_config
from .integrator import BDFScheme, Discretization, RunResult, SubIterationError, bdf_scheme, run
from .kernels import assemble_curlcurl_operator, assemble_velocity_operator, matrix_G, matrix_H, matrix_I, matrix_Htilde
from .problems import MHDParams, cavity_case, manufactured_2d, manufactured_3d
from .solvers import CGConfig, ConvergenceError, cg_solve, solve_magnetic, solve_velocity

__version__ = "0.1.0"
