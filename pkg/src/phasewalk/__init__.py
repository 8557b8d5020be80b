"""Phase-space CoM walking planner with manifold-based disturbance recovery."""
from .dynamics import (ComSurface, ControlInput, PhaseState, RobotParams, Trajectory,
                       analytic_flow, integrate, omega_from_surface, pipm_derivative)
from .kernels import BACKEND
from .manifold import (BundleSpec, DisturbanceCategory, ManifoldParams, classify_disturbance,
                       recoverability_radius, sensitivity_norm, sigma, sigma_apex, zeta)
from .planner import (PlannerConfig, StepPlan, StepSpec, find_step_transition,
                      generate_nominal, plan_steered_walk, search_lateral_foot,
                      smooth_multicontact)

__version__ = "0.1.0"
