"""Monotone difference-quadrature schemes for nonlocal Isaacs and Bellman equations."""

from .analysis import (Coupling, ModulusSpec, RateReport, RateTarget, SeparableTarget, consistency_order,
                       fit_rate, manufactured_source, omega_bar, refinement_study, theoretical_rate,
                       truncation_distance)
from .config import RunConfig
from .errors import (CFLViolation, ConfigurationError, DomainError, IntegrationError, MonotonicityError,
                     NonlocalIsaacsError, SolverError)
from .grid import Grid, SolutionField, interpolate, read_checkpoint, tent_stencil, tent_weight, write_checkpoint
from .levy import (LevyMeasure, ball_integral, gamma_factor, shell_integral, small_jump_second_moment,
                   truncated_mass)
from .params import SchemeParams, resolve_delta
from .problem import (CANONICAL, ControlProblem, SmoothFunction, canonical_problem, hamiltonian_table,
                      k_u0_estimate, lemma_constant, named_problem, nonlocal_oracle, validate_assumptions)
from .stencil import (StencilAssembler, StencilWeights, cfl_check, check_coefficients, drift_weights,
                      effective_drift, nonlocal_weights, scheme_coefficients)
from .stepper import DiffusionCorrection, Scheme, assemble_diffusion_correction, solve, stability_bound

__version__ = "0.1.0"
