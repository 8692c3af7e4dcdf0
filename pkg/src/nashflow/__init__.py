"""Equilibrium seeking and tracking for networked agents.

The decision layer runs a projected primal-dual flow on a shared-
constraint game; the physical layer tracks its moving steady-state
targets, either with high-gain linear output regulation or recursive
design for strict-feedback chains.  An active-set oracle supplies exact
equilibria for verification.
"""

from .convex import AllSpace, Box, NonnegativeOrthant, Product
from .gnep import (GnepProblem, PrimalDualState, default_state,
                   kkt_residual, monotonicity_probe, primal_dual_step,
                   run_flow)
from .graph import CommGraph, dependency_check, max_consensus, path_graph
from .oracle import OracleError, QuadraticGnep, solve_ve_active_set
from .linctrl import LinearNetwork, design_controllers
from .backstep import (BacksteppingGains, StrictFeedbackSystem,
                       steady_state_manifold, validate_gains)
from .scenarios import (OpfParams, ThermalParams, ieee37_graph,
                        opf_scenario, thermal_scenario)
from .sim import (Reference, SimulationBlowUp, Trajectory,
                  simulate_algorithm1, simulate_algorithm2, simulate_flow,
                  write_csv)

__version__ = "0.1.0"

__all__ = [
    "AllSpace", "Box", "NonnegativeOrthant", "Product",
    "GnepProblem", "PrimalDualState", "default_state", "kkt_residual",
    "monotonicity_probe", "primal_dual_step", "run_flow",
    "CommGraph", "dependency_check", "max_consensus", "path_graph",
    "OracleError", "QuadraticGnep", "solve_ve_active_set",
    "LinearNetwork", "design_controllers",
    "BacksteppingGains", "StrictFeedbackSystem", "steady_state_manifold",
    "validate_gains",
    "OpfParams", "ThermalParams", "ieee37_graph", "opf_scenario",
    "thermal_scenario",
    "Reference", "SimulationBlowUp", "Trajectory", "simulate_algorithm1",
    "simulate_algorithm2", "simulate_flow", "write_csv",
    "__version__",
]
