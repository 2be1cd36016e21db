"""Overdetermined elliptic problems on periodic perturbations of a cylinder.

Radial ground states and spectra in the unit ball, the cylinder threshold
periods, the Dirichlet-to-Neumann operator on perturbed cylinders and
continuation of the bifurcating branch of onduloid-type domains.
"""

from .nonlinearity import Nonlinearity
from .numerics import BallGeometry, UniformGrid1D
from .radial_ball import ShootingConfig, solve_ground_profile
from .ball_spectra import dirichlet_spectrum, robin_spectrum, check_assumptions
from .cylinder_spectra import t_bar, t_star, find_t_star_by_root, sigma_curve, mode_solution
from .dtn import EvenFourierProfile, DtNGrid, evaluate_g, ht_apply_2d
from .continuation import BranchSetup, certify_bifurcation, extend_branch, branch_diagnostics

__version__ = "0.1.0"

__all__ = [
    "Nonlinearity", "BallGeometry", "UniformGrid1D", "ShootingConfig", "solve_ground_profile",
    "dirichlet_spectrum", "robin_spectrum", "check_assumptions", "t_bar", "t_star",
    "find_t_star_by_root", "sigma_curve", "mode_solution", "EvenFourierProfile", "DtNGrid",
    "evaluate_g", "ht_apply_2d", "BranchSetup", "certify_bifurcation", "extend_branch",
    "branch_diagnostics",
]
