"""Slot-based simulator and completion-time optimizer for cooperative
sensing UAV cellular networks."""

from .analysis import (
    DominanceModel,
    SensitivityInputs,
    dTmax_dPRth,
    dTmax_dq,
    dominance_threshold,
)
from .audit import audit_trace
from .bench import (
    ExperimentResult,
    Scenario,
    ScenarioConfig,
    audit_solution,
    fsl_plan,
    generate_scenario,
    nc_config,
    run_experiment,
    run_scheme,
)
from .channel import (
    ChannelParams,
    LinkBudget,
    Position3,
    average_pathloss,
    link_budget,
    link_rate,
    los_probability,
)
from .itsso import ItssoConfig, Solution, initial_solution, run_itsso
from .placement import SensingAssignment, adjust_collinear, delta_bounds, optimize_sensing_locations
from .scheduler import GreedyScheduler, RandomScheduler, schedule_slot
from .sensing import (
    SensingParams,
    Task,
    min_cooperative_uavs,
    required_sensing_radius,
    sensing_success_coop,
    sensing_success_single,
)
from .simulator import SignalingParams, SimOutcome, UavPlan, run, signaling_cost
from .trajectory import KinematicParams, Leg, delta_lower_bound, optimize_leg, rate_gradient

__version__ = "0.1.0"
