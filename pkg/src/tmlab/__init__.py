"""Discrete curvature-constrained Trudinger-Moser experiments on closed triangulated surfaces."""
from .errors import *  # noqa: F401,F403
from .mesh import (TriangleMesh, apply_conformal_factor, gen_flat_torus, gen_icosphere,
                   geodesic_distances, load_off, save_off)
from .operators import (ConstrainedField, Operators, build_operators, curvature_moment,
                        dirichlet_energy, norm_1alpha, project_Kg)
from .spectrum import EigenResult, lambda_g, lambda_star, poincare_check
from .solver import (TMProblem, TMSolution, constant_blowup_chi_zero, divergence_probe,
                     el_residual, estimate_supremum, functional_value, solve_subcritical)
from .green import (GreenData, attach_fit, build_phi_epsilon, estimate_Ap, fit_Ap,
                    smallest_resolvable_eps, solve_green, upper_bound_value)
from .probes import (RadialProfile, bubble_mass, bubble_profile, carleson_chang_experiment,
                     moser_profile, moser_sequence, moser_tilde, truncated_bubble_profile)
from .liouville import (ConformalMetric, concentrated_factor, conformal_metric,
                        conformal_volume, curvature_transform, liouville_energy,
                        modified_liouville_energy, random_smooth_factors, shift_to_volume,
                        theorem4_batch, theorem4_bound, verify_theorem4)

__version__ = "0.1.0"
