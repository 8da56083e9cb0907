"""Duty-cycle planning for energy-harvesting sensor networks with wake-up radios."""

from .battery import (
    BatteryChain,
    BatteryDistribution,
    battery_stationary,
    build_battery_chain,
    coupled_fixed_point,
    pr_battery_at_least,
    pr_transmit_semiclosed,
)
from .config import SimConfig, load_config, load_preset, parse_config, serialize_config
from .dynamics import HarvestModel, StateTransitionMatrix, build_transition_matrix, harvest_active_prob, state_stationary
from .errors import (
    ConfigError,
    DegenerateChainError,
    DomainError,
    EhdutyError,
    IterationLimitError,
    ModelInconsistencyError,
    ParseError,
)
from .experiment import SweepResult, sweep
from .markov import stationary_distribution
from .model import AreaSpec, Device, DeviceState, DutyCycleConfig, Event, Position, Report, event_information, sensing_power
from .policies import PolicyKind, cluster_count, genie_detector, grid_search_duty, knn_clustering, random_duty_policy, round_robin_schedule
from .sim import RunMetrics, RunResult, World, run_experiment, run_simulation, step_tti
from .special import reg_incomplete_beta
from .wakeup import EnergyLedger, WakeupDecision, wakeup_round

__version__ = "0.1.0"
