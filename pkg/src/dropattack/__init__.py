"""Attack synthesis and simulation for control loops with lossy actuation.

A linear plant is driven by a receding-horizon controller whose commands
cross a packet-drop channel with per-channel Bernoulli delivery rates.  The
package builds the horizon controllers for acknowledgement-based (tcp-like)
and fire-and-forget (udp-like) loops, characterizes how the expected
horizon cost responds when an attacker shifts the delivery rates inside a
detection-constrained region, synthesizes optimal stationary and
per-step attack schedules, and validates every closed form by Monte-Carlo
simulation.
"""

from .attack_iid import (
    AttackCharacterization,
    AttackContext,
    Convexity,
    ObjectiveQuadratic,
    PerfectChannelReport,
    attack_context,
    optimal_alpha_tcp,
    optimal_alpha_udp,
    peak_alpha_udp,
    perfect_channel_condition_tcp,
    tcp_objective,
    tcp_objective_coeffs,
    trough_alpha_tcp,
    udp_objective,
    udp_objective_coeffs,
)
from .attack_qp import (
    AttackSchedule,
    BoxQP,
    SolverSettings,
    build_qp_tcp,
    build_qp_udp,
    schedule_objective,
    solve_box_qp_max,
    solve_iid_constrained,
)
from .channel import (
    STREAM_INIT,
    STREAM_LOSS,
    STREAM_NOISE,
    ChannelSpec,
    DetectionSpec,
    MonitorState,
    fresh_monitor,
    in_safe_region,
    philox_stream,
    sample_losses,
    update_monitor,
)
from .config import ExperimentConfig, load_experiment, parse_experiment
from .controller import (
    ControllerGain,
    Protocol,
    apply_receding_horizon,
    control_gain,
    nominal_expected_cost,
    optimal_input_sequence,
    stack_channel_means,
)
from .costs import (
    CostReport,
    cost_increase_alpha0,
    cost_increase_alpha1_tcp,
    cost_increase_alpha1_udp,
    cost_increase_alphamax_udp,
    expected_attacked_cost,
    feedback_benefit,
    initial_state_average,
)
from .errors import (
    ConfigError,
    DimensionError,
    DropAttackError,
    InfeasibleRegionError,
    NumericalError,
)
from .model import (
    PredictionEnsemble,
    ReachabilityReport,
    SystemModel,
    build_prediction_ensemble,
    check_reachable,
    step_plant,
)
from .simulate import (
    AggregateReport,
    AttackPlan,
    EpisodeConfig,
    ResolvedAttack,
    SimulationTrace,
    empirical_increase,
    horizon_cost_samples,
    monte_carlo,
    resolve_attack,
    run_episode,
    stage_cost,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateReport",
    "AttackCharacterization",
    "AttackContext",
    "AttackPlan",
    "AttackSchedule",
    "BoxQP",
    "ChannelSpec",
    "ConfigError",
    "ControllerGain",
    "Convexity",
    "CostReport",
    "DetectionSpec",
    "DimensionError",
    "DropAttackError",
    "EpisodeConfig",
    "ExperimentConfig",
    "InfeasibleRegionError",
    "MonitorState",
    "NumericalError",
    "ObjectiveQuadratic",
    "PerfectChannelReport",
    "PredictionEnsemble",
    "Protocol",
    "ReachabilityReport",
    "ResolvedAttack",
    "SimulationTrace",
    "SolverSettings",
    "STREAM_INIT",
    "STREAM_LOSS",
    "STREAM_NOISE",
    "SystemModel",
    "apply_receding_horizon",
    "attack_context",
    "build_prediction_ensemble",
    "build_qp_tcp",
    "build_qp_udp",
    "check_reachable",
    "control_gain",
    "cost_increase_alpha0",
    "cost_increase_alpha1_tcp",
    "cost_increase_alpha1_udp",
    "cost_increase_alphamax_udp",
    "empirical_increase",
    "expected_attacked_cost",
    "feedback_benefit",
    "fresh_monitor",
    "horizon_cost_samples",
    "in_safe_region",
    "initial_state_average",
    "load_experiment",
    "monte_carlo",
    "nominal_expected_cost",
    "optimal_alpha_tcp",
    "optimal_alpha_udp",
    "optimal_input_sequence",
    "parse_experiment",
    "peak_alpha_udp",
    "perfect_channel_condition_tcp",
    "philox_stream",
    "resolve_attack",
    "run_episode",
    "sample_losses",
    "schedule_objective",
    "solve_box_qp_max",
    "solve_iid_constrained",
    "stack_channel_means",
    "stage_cost",
    "step_plant",
    "tcp_objective",
    "tcp_objective_coeffs",
    "trough_alpha_tcp",
    "udp_objective",
    "udp_objective_coeffs",
    "update_monitor",
]
