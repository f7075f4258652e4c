"""Spectral-Galerkin simulation and local control synthesis for bilinear PDEs."""

from .basis import (BasisSpec, Geometry, SpectralState, eigenpair,
                    inner_product, project_function, sobolev_norm)
from .controls import ControlSignal, Interpolation
from .coupling import (CouplingMatrix, HypothesisReport, PotentialSpec,
                       builtin_potential, check_hypothesis, coupling_matrix)
from .errors import (AccuracyError, BasisMismatchError, BilictrlError,
                     ConfigError, ConvergenceError, GapConditionError,
                     HypothesisViolationError, IllPosedError,
                     OutOfNeighborhoodError, QuadratureError, TailLeakWarning)
from .moments import (MomentProblem, MomentSolution, gram_matrix,
                      ingham_bounds_empirical, solve_moments)
from .nls import (NLSTrajectory, nls_group_apply, nls_linearized_targets,
                  physical_norm, propagate_nls, propagate_nls_linearized,
                  synthesize_nls, zeta_from_physical)
from .schrodinger import (PropagatorConfig, Scheme, Trajectory,
                          fd_oracle_propagate, free_evolution, ground_state,
                          linearized_response_free, propagate,
                          propagate_linearized)
from .synthesis import (FrequencyFamily, SynthesisConfig, SynthesisReport,
                        TangentProjector, Variant, canonical_target,
                        frequency_set, linearized_targets,
                        linearized_targets_h10, sphere_lift, synthesize,
                        tangent_project)
from .wave import (NonlinearitySpec, WaveState, WaveTrajectory,
                   builtin_nonlinearity, propagate_wave,
                   propagate_wave_linearized, synthesize_wave,
                   wave_group_apply, wave_linearized_targets)

__version__ = "0.1.0"
