"""Mediated probabilities of causation: identification, estimation, simulation."""

from .basis import PolynomialBasis, UniformWeight, parse_basis
from .eif import (PseudoOutcome, expected_pseudo_outcome, phi_delta, phi_psi, phi_zeta,
                  pseudo_outcome)
from .errors import (BadFoldCount, ConvergenceFailure, DegenerateConditioning, DomainError,
                     EmptySubset, MedPCError, PositivityViolation, SimulationFailure,
                     SingularDesign)
from .estimands import (EstimandValues, NuisanceAt, identify, identify_all, identify_delta,
                        identify_primes, identify_psi, identify_totals, identify_xi,
                        identify_zeta, pc_mediator, pc_outcome)
from .montecarlo import SimulationConfig, SimulationReport, curve_sweep, run
from .nuisance import (NoiseSpec, TrueNuisance, assign_folds, crossfit_nuisance, fit_logit,
                       fit_nuisance, perturb)
from .projection import (ProjectionFit, ProjectionModel, fit_pseudo_outcomes, predict_ci,
                         quadrature_projection, sandwich, solve, true_projection)
from .world import (Curve, DgpSpec, ObservedData, ObservedRecord, PotentialWorld, observe,
                    oracle_estimands, sample_observed, sample_worlds, true_nuisance)

__version__ = "0.1.0"
