"""Leader-following consensus of identical LTI agents under switching directed graphs."""

from .gainsynth import (
    AgentModel,
    AveragingParams,
    GainSet,
    check_detectable,
    check_stabilizable,
    solve_alpha_star,
    synth_feedback,
    synth_observer,
    synth_stabilizer,
    synthesize,
)
from .graphtop import LeaderGraph, is_connected, jointly_connected, structure_matrices, union
from .netsim import InitialCondition, TrajectoryLog, simulate
from .scenario import Scenario, demo_scenario, load_scenario
from .switchsched import Interval, SwitchingSchedule, estimate_delta_bar, validate

__version__ = "0.1.0"
