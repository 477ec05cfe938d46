"""Conservative numerics for a degenerate drift-diffusion model of SIS
epidemic dynamics: stationary states, mass-conserving evolution, Hardy and
Poincare constants, Sturm-Liouville spectral solutions and audits."""

from .analysis import (DecayReport, concentration_metrics, fit_decay_rate, local_exponent,
                       origin_scaling_audit, pointwise_bound_audit, weak_residual)
from .conservation import check_conservation_conditions, gronwall_constant
from .errors import (CoefficientError, ConfigError, DivergentNormError, EigenConvergenceError,
                     NumericalFailure, QuadratureError, SingularSystemError, ZeroNormError)
from .functionals import (hardy_constant_A, phi_weight, poincare_constant, psi_weight,
                          weighted_norm)
from .grid import Field, Grid, build_grid, total_mass
from .model import (GeneralCoefficients, ModelParams, big_F, coeffs, omega,
                    sis_general_coefficients, stationary)
from .operators import TridiagonalOperator, assemble_operator
from .solver import Trajectory, evolve, step
from .spectral import (CoordinateMap, SpectralBasis, coordinate_map, drift_l, eigensolve,
                       evaluate_series, potential_q, project_initial)

__version__ = "0.1.0"
