"""Numerical laboratory for the magnetic Choquard equation with HLS-critical growth.

Modules: :mod:`constants` (sharp constants, thresholds), :mod:`field`
(grids, potentials, covariant differences), :mod:`riesz` (Riesz
convolution), :mod:`energy` (functionals, Nehari projection), :mod:`bubble`
(bubble estimates) and :mod:`solver` (ground states).
"""
__version__ = "0.1.0"

from .constants import (Family, ProblemParams, best_sobolev_constant, case_window, constants_report, gamma,
                        hls_sharp_constant, ps_threshold, shl_constant)
from .errors import ChoquardLabError, ConvergenceError, DegenerateInputError, NumericalAccuracyError, ValidationError
from .field import (DEFAULT_SPEC, ComplexField, Grid, PotentialSet, PotentialSpec, covariant_gradient,
                    diamagnetic_check, load_field, lp_norm, magnetic_norm_sq, make_grid, sample_potentials,
                    save_field)
from .riesz import interaction, riesz_convolve, riesz_convolve_direct, riesz_plan
from .energy import EnergyBreakdown, energy, fibering_scan, gradient, nehari_project, nehari_residual
from .bubble import (BubbleParams, case1_check, case2_scan, closed_form_I3, closed_form_I4, divergence_scan,
                     l2_mass_integral, make_u_eps, talenti_bubble)
from .solver import SolveConfig, Solution, compare_levels, solve_ground_state, vanishing_diagnostic
