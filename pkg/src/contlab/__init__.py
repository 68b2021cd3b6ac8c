"""contlab: a numerical laboratory for continuity equations with rough drift.

Builds explicit smooth approximation pairs for non-smooth velocity fields,
certifies whether candidate measure-valued solutions lie in the associated
uniqueness class, solves the Cauchy problem by characteristics and by vanishing
viscosity, and exercises the backward-dual (Holmgren) estimates numerically.
"""

from .measures import (Box, DensityPiece, MeasurePath, SignedMeasure, TestFunction,
                       bl_distance, bump, integrate, path_integrate, pushforward,
                       total_variation)
from .fields import (FieldDecomposition, Mollifier, SmoothField, VectorField,
                     cos2_mollifier, mirror, modulus_of_continuity, mollify,
                     one_sided_constant, resolve_field)
from .certify import (ApproximationPair, Certificate, ZeroSetInfo, certificate,
                      check_conditions, corollary1_pair, corollary2_pair, radial_pair,
                      split_stationary, sqrt_pair, zero_set)
from .transport import (ExistenceRun, FlowConfig, MomentGateError, existence_sequence,
                        flow_map, gronwall_check, solve, solve_atomic,
                        solve_density_1d, weak_residual)
from .dual import (CutoffProfile, DualSolution, cutoff_dual, duality_gap,
                   gradient_bound_check, solve_dual, tail_functional)
from .viscous import (FPGrid, median_of_slice, selection_experiment, solve_fp_1d,
                      upper_extreme_trajectory)
from .scenarios import list_scenarios, run

__version__ = "0.1.0"
