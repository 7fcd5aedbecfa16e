"""Multi-echelon supply network: optimal order-up-to policies, demand propagation, simulation."""
from .demand import DemandModel, DemandPmf, discretize_normal, pmf_from_samples
from .network import FirmParams, Network, build_network, validate_costs
from .propagation import PropagationConfig, propagate
from .scenario import Scenario, parse_scenario, run_scenario
from .simulator import Shock, Simulator, allocate
from .solver import PolicyTable, SolverInstance, brute_force_dp, compute_policy, cost_to_go, optimal_request

__all__ = [
    "DemandModel", "DemandPmf", "discretize_normal", "pmf_from_samples",
    "FirmParams", "Network", "build_network", "validate_costs",
    "PropagationConfig", "propagate",
    "Scenario", "parse_scenario", "run_scenario",
    "Shock", "Simulator", "allocate",
    "PolicyTable", "SolverInstance", "brute_force_dp", "compute_policy", "cost_to_go", "optimal_request",
]

__version__ = "0.1.0"
