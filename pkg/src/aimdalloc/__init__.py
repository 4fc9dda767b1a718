"""Distributed multi-resource allocation with stochastic AIMD agents."""

from .aimd import (AgentState, AimdParams, CapacitySignals, agent_step, detect_capacity_events,
                   gamma_from_delta, response_probability, update_average)
from .cost_model import (CostFunction, MembershipReport, MonomialTerm, CameraCostRanges, check_membership,
                         finite_diff_gradient, camera_cost, sample_paper_cost)
from .estimators import AimdAllocator, CentralizedAllocator
from .exceptions import AimdAllocError, ConfigError, DimensionError, SolverError
from .metrics import (MetricsReport, build_report, cost_ratio, event_count_linearity, gradient_spread,
                      relative_error, utilization)
from .oracle import OracleSolution, kkt_residual, project_block_simplex, solve_centralized
from .scenario import ScenarioSpec, generate_paper_scenario, load_config, save_config
from .simulator import CameraCosts, SimConfig, SimState, Simulator, Trace, run

__version__ = "0.1.0"
