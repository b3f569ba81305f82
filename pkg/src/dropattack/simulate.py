"""Closed-loop simulation and Monte-Carlo estimation.

Two kinds of experiment live here.

Closed-loop episodes (:func:`run_episode`, :func:`monte_carlo`) run the
receding-horizon loop for T steps: the controller transmits the first block
of its optimal sequence, the channel drops packets, the plant steps, and the
monitor folds the realized outcomes into its running means.  The realized
cost ledger charges, per step, the current-state weight, the first
input-penalty block on the delivered input, and the first state-penalty
block on the successor state.  Detection never interrupts an episode; it is
recorded and reported.

Horizon experiments (:func:`horizon_cost_samples`,
:func:`empirical_increase`) estimate the expected horizon cost that the
closed-form attack formulas talk about: the operator computes its sequence
once at a fixed state, the whole horizon is rolled out under a given
channel law, and the stacked quadratic cost is accumulated.  For the
udp-like loop the realized cost is an unbiased sample of the closed form.
The tcp-like accounting treats packet fates as known by the time the
predicted-state penalty is charged (acknowledgements plus re-planning), so
its closed form carries no delivery-variance term; sampling that
conditional quadratic without bias requires decorrelating the two loss
factors of the state penalty, hence the tcp estimator draws two independent
delivery sequences per sample and bridges the quadratic across them.

Randomness: every (seed, realization, purpose) triple owns an independent
counter-based stream, so runs that differ only in the attack share noise
and loss uniforms (common random numbers) and aggregation order cannot
change any draw.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .attack_iid import attack_context
from .attack_qp import (
    AttackSchedule,
    SolverSettings,
    build_qp_tcp,
    build_qp_udp,
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
    update_monitor,
)
from .controller import ControllerGain, Protocol, control_gain
from .errors import DimensionError
from .model import PredictionEnsemble, SystemModel, build_prediction_ensemble

__all__ = [
    "AttackPlan",
    "ResolvedAttack",
    "EpisodeConfig",
    "SimulationTrace",
    "AggregateReport",
    "stage_cost",
    "resolve_attack",
    "run_episode",
    "monte_carlo",
    "horizon_cost_samples",
    "empirical_increase",
]

_KINDS = ("none", "iid", "nonstat")


@dataclass(frozen=True, eq=False)
class AttackPlan:
    """What the attacker does and when.

    kind "none" leaves the channel nominal.  kind "iid" holds one rate per
    channel from ``onset`` on: either ``alpha`` (shared scalar), ``means``
    (per-channel vector), or, when both are None, the rate is synthesized
    at onset from the state ("onset" mode) or from the model's initial mean
    ("mean" mode).  kind "nonstat" plays a per-step schedule: a fixed
    ``schedule`` array replayed cyclically, or one synthesized at onset by
    the box-QP solver; with ``resynthesize`` the solver reruns every step
    and applies the first row, mirroring the controller's receding horizon.
    """

    kind: str = "none"
    onset: int = 0
    alpha: float | None = None
    means: np.ndarray | None = None
    schedule: np.ndarray | None = None
    state_mode: str = "onset"
    resynthesize: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DimensionError(f"attack kind must be one of {_KINDS}")
        if self.onset < 0:
            raise DimensionError("attack onset must be >= 0")
        if self.state_mode not in ("onset", "mean"):
            raise DimensionError("state_mode must be 'onset' or 'mean'")
        if self.alpha is not None and not 0.0 <= float(self.alpha) <= 1.0:
            raise DimensionError("attack alpha must lie in [0, 1]")
        if self.means is not None:
            means = np.array(self.means, dtype=float)
            if np.any(means < 0.0) or np.any(means > 1.0):
                raise DimensionError("attack means must lie in [0, 1]")
            means.setflags(write=False)
            object.__setattr__(self, "means", means)
        if self.schedule is not None:
            sched = np.array(self.schedule, dtype=float)
            if sched.ndim != 2 or np.any(sched < 0.0) or np.any(sched > 1.0):
                raise DimensionError(
                    "attack schedule must be a (steps, channels) array in [0, 1]"
                )
            sched.setflags(write=False)
            object.__setattr__(self, "schedule", sched)

    @property
    def needs_state(self) -> bool:
        """True when synthesis happens at onset from the realized state."""
        if self.kind == "none":
            return False
        fixed = (
            self.alpha is not None
            or self.means is not None
            or self.schedule is not None
        )
        return not fixed and self.state_mode == "onset"


@dataclass(frozen=True, eq=False)
class ResolvedAttack:
    """Concrete per-step channel law from ``onset`` on."""

    kind: str
    onset: int
    constant: np.ndarray | None
    schedule: np.ndarray | None
    info: dict = field(default_factory=dict)

    def means_at(self, step: int, nominal: np.ndarray) -> np.ndarray:
        if self.kind == "none" or step < self.onset:
            return nominal
        if self.constant is not None:
            return self.constant
        offset = step - self.onset
        return self.schedule[offset % self.schedule.shape[0]]


def resolve_attack(
    plan: AttackPlan,
    model: SystemModel,
    ens: PredictionEnsemble,
    channel: ChannelSpec,
    detection: DetectionSpec,
    protocol: Protocol,
    x: np.ndarray,
    gain: ControllerGain | None = None,
    settings: SolverSettings = SolverSettings(),
) -> ResolvedAttack:
    """Turn a plan into a concrete channel law, synthesizing if needed."""
    if plan.kind == "none":
        return ResolvedAttack("none", plan.onset, None, None, {"kind": "none"})
    if plan.kind == "iid":
        if plan.alpha is not None:
            const = np.full(ens.m, float(plan.alpha))
            return ResolvedAttack(
                "iid", plan.onset, const, None,
                {"kind": "iid", "alpha": float(plan.alpha), "fixed": True},
            )
        if plan.means is not None:
            return ResolvedAttack(
                "iid", plan.onset, np.asarray(plan.means, dtype=float), None,
                {"kind": "iid", "fixed": True},
            )
        ctx = attack_context(ens, model, channel, detection, protocol, x, gain)
        qp = build_qp_udp(ctx) if protocol is Protocol.UDP_LIKE else build_qp_tcp(ctx)
        sol = solve_iid_constrained(qp, settings)
        return ResolvedAttack(
            "iid", plan.onset, sol.means[0].copy(), None,
            {
                "kind": "iid",
                "objective": sol.objective,
                "winner": sol.winner,
                "means": [float(v) for v in sol.means[0]],
            },
        )
    # nonstat
    if plan.schedule is not None:
        return ResolvedAttack(
            "nonstat", plan.onset, None, np.asarray(plan.schedule, dtype=float),
            {"kind": "nonstat", "fixed": True},
        )
    ctx = attack_context(ens, model, channel, detection, protocol, x, gain)
    qp = build_qp_udp(ctx) if protocol is Protocol.UDP_LIKE else build_qp_tcp(ctx)
    sol = solve_box_qp_max(qp, settings)
    return ResolvedAttack(
        "nonstat", plan.onset, None, sol.means.copy(),
        {
            "kind": "nonstat",
            "objective": sol.objective,
            "winner": sol.winner,
            "stationarity": sol.stationarity,
        },
    )


@dataclass(frozen=True, eq=False)
class EpisodeConfig:
    """Everything one closed-loop run needs (attack aside from its seed)."""

    model: SystemModel
    channel: ChannelSpec
    detection: DetectionSpec
    protocol: Protocol
    plan: AttackPlan = AttackPlan()
    T: int = 50
    seed: int = 0
    sample_x0: bool = False
    zero_input: bool = False
    detector_min_steps: int = 1
    halt_on_detect: bool = False
    solver: SolverSettings = SolverSettings()

    def __post_init__(self):
        if self.T < 1:
            raise DimensionError("T must be >= 1")
        if self.plan.onset > self.T:
            raise DimensionError(
                f"attack onset {self.plan.onset} exceeds episode length {self.T}"
            )
        if self.channel.m != self.model.m:
            raise DimensionError(
                f"channel has {self.channel.m} entries for "
                f"{self.model.m} actuator channels"
            )
        self.detection.bounds(self.channel)  # raises on length mismatch


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Full record of one episode; arrays are step-indexed."""

    states: np.ndarray        # (T+1, n)
    inputs: np.ndarray        # (T, m) commanded inputs
    losses: np.ndarray        # (T, m) realized 0/1 deliveries
    noises: np.ndarray        # (T, n)
    stage_costs: np.ndarray   # (T,)
    cumulative: np.ndarray    # (T,)
    monitor_means: np.ndarray  # (T, m)
    detected: bool
    first_detection: int | None
    terminal_cost: float


def stage_cost(model: SystemModel, x, u_applied, v, x_next=None) -> float:
    """Realized per-step cost.

    Charges x'Qx plus the first input-penalty block on the delivered input
    v * u; when ``x_next`` is given, the first state-penalty block on the
    successor is added (the harness always passes it, so each step of the
    episode is billed once for where it lands).
    """
    x = np.asarray(x, dtype=float)
    u_eff = np.asarray(v, dtype=float) * np.asarray(u_applied, dtype=float)
    m, n = model.m, model.n
    psi1 = model.input_penalty[:m, :m]
    cost = float(x @ (model.Q @ x)) + float(u_eff @ (psi1 @ u_eff))
    if x_next is not None:
        x_next = np.asarray(x_next, dtype=float)
        omega1 = model.state_penalty[:n, :n]
        cost += float(x_next @ (omega1 @ x_next))
    return cost


def run_episode(
    cfg: EpisodeConfig,
    realization: int = 0,
    ens: PredictionEnsemble | None = None,
    gain: ControllerGain | None = None,
    resolved: ResolvedAttack | None = None,
) -> SimulationTrace:
    """One closed-loop episode; bitwise reproducible for fixed arguments."""
    model = cfg.model
    n, m, T = model.n, model.m, cfg.T
    if ens is None:
        ens = build_prediction_ensemble(model)
    if gain is None:
        gain = control_gain(ens, model, cfg.channel.mean_diag, cfg.protocol)

    noise_rng = philox_stream(cfg.seed, realization, STREAM_NOISE)
    loss_rng = philox_stream(cfg.seed, realization, STREAM_LOSS)
    init_rng = philox_stream(cfg.seed, realization, STREAM_INIT)

    noise_chol = np.linalg.cholesky(model.noise_cov)
    x = model.init_mean.copy()
    if cfg.sample_x0:
        x = x + np.linalg.cholesky(model.init_cov) @ init_rng.standard_normal(n)

    # first input block of the sequence gain, precomputed as a feedback map
    feedback = -gain.solve(ens.cross_gram)[:m, :]

    plan = cfg.plan
    nominal = cfg.channel.mean_diag

    states = np.empty((T + 1, n))
    inputs = np.empty((T, m))
    losses = np.empty((T, m))
    noises = np.empty((T, n))
    stage_costs = np.empty(T)
    monitor_means = np.empty((T, m))
    states[0] = x

    monitor = fresh_monitor(m)
    first_detection = None

    for k in range(T):
        if resolved is None and k == plan.onset and plan.kind != "none":
            x_syn = x if plan.state_mode == "onset" else model.init_mean
            resolved = resolve_attack(
                plan, model, ens, cfg.channel, cfg.detection,
                cfg.protocol, x_syn, gain, cfg.solver,
            )
        if plan.kind == "nonstat" and plan.resynthesize and k >= plan.onset:
            ctx = attack_context(
                ens, model, cfg.channel, cfg.detection, cfg.protocol, x, gain
            )
            qp = (
                build_qp_udp(ctx)
                if cfg.protocol is Protocol.UDP_LIKE
                else build_qp_tcp(ctx)
            )
            sol = solve_box_qp_max(qp, cfg.solver)
            means_k = sol.means[0]
        elif resolved is not None:
            means_k = resolved.means_at(k, nominal)
        else:
            means_k = nominal

        u_cmd = np.zeros(m) if cfg.zero_input else feedback @ x
        v = (loss_rng.random(m) < means_k).astype(float)
        w = noise_chol @ noise_rng.standard_normal(n)
        x_next = model.A @ x + model.B @ (v * u_cmd) + w

        stage_costs[k] = stage_cost(model, x, u_cmd, v, x_next)
        inputs[k] = u_cmd
        losses[k] = v
        noises[k] = w
        states[k + 1] = x_next

        monitor = update_monitor(monitor, v)
        monitor_means[k] = monitor.means
        if (
            first_detection is None
            and monitor.steps >= cfg.detector_min_steps
            and not in_safe_region(monitor.means, cfg.channel, cfg.detection)
        ):
            first_detection = k
            if cfg.halt_on_detect:
                T = k + 1  # truncate the episode at the detection step
                break

        x = x_next

    cumulative = np.cumsum(stage_costs[:T])
    return SimulationTrace(
        states=states[: T + 1],
        inputs=inputs[:T],
        losses=losses[:T],
        noises=noises[:T],
        stage_costs=stage_costs[:T],
        cumulative=cumulative,
        monitor_means=monitor_means[:T],
        detected=first_detection is not None,
        first_detection=first_detection,
        terminal_cost=float(cumulative[-1]),
    )


@dataclass(frozen=True, eq=False)
class AggregateReport:
    """Monte-Carlo summary over R independent realizations."""

    realizations: int
    mean_states: np.ndarray     # (T+1, n)
    mean_cumulative: np.ndarray  # (T,)
    terminal_costs: np.ndarray  # (R,)
    mean_terminal: float
    se_terminal: float
    detection_rate: float
    mean_first_detection: float | None
    attack_info: dict = field(default_factory=dict)


def monte_carlo(cfg: EpisodeConfig, realizations: int) -> AggregateReport:
    """Run ``realizations`` episodes with per-realization derived streams.

    When the attack can be synthesized once (fixed parameters, synthesis
    from the initial mean, or onset 0 with a deterministic initial state)
    it is resolved a single time and shared across episodes; otherwise each
    episode synthesizes at its own onset state.
    """
    if realizations < 1:
        raise DimensionError("realizations must be >= 1")
    if cfg.halt_on_detect:
        raise DimensionError(
            "aggregation needs full-length episodes; disable halt_on_detect"
        )
    model = cfg.model
    ens = build_prediction_ensemble(model)
    gain = control_gain(ens, model, cfg.channel.mean_diag, cfg.protocol)

    plan = cfg.plan
    resolved = None
    deterministic_onset_state = plan.onset == 0 and not cfg.sample_x0
    if plan.kind != "none" and not plan.resynthesize and (
        not plan.needs_state or deterministic_onset_state
    ):
        x_syn = model.init_mean
        resolved = resolve_attack(
            plan, model, ens, cfg.channel, cfg.detection,
            cfg.protocol, x_syn, gain, cfg.solver,
        )

    T, n = cfg.T, model.n
    sum_states = np.zeros((T + 1, n))
    sum_cumulative = np.zeros(T)
    terminal = np.empty(realizations)
    detections = 0
    first_hits = []
    for r in range(realizations):
        trace = run_episode(cfg, r, ens, gain, resolved)
        sum_states += trace.states
        sum_cumulative += trace.cumulative
        terminal[r] = trace.terminal_cost
        if trace.detected:
            detections += 1
            first_hits.append(trace.first_detection)

    mean_terminal = float(np.mean(terminal))
    se_terminal = float(np.std(terminal, ddof=1) / math.sqrt(realizations)) \
        if realizations > 1 else 0.0
    return AggregateReport(
        realizations=realizations,
        mean_states=sum_states / realizations,
        mean_cumulative=sum_cumulative / realizations,
        terminal_costs=terminal,
        mean_terminal=mean_terminal,
        se_terminal=se_terminal,
        detection_rate=detections / realizations,
        mean_first_detection=(
            float(np.mean(first_hits)) if first_hits else None
        ),
        attack_info=dict(resolved.info) if resolved is not None else
        {"kind": plan.kind, "per_episode_synthesis": plan.kind != "none"},
    )


# ----------------------------------------------------- horizon experiments

def _expand_step_means(ens: PredictionEnsemble, step_means) -> np.ndarray:
    step_means = np.asarray(step_means, dtype=float)
    if step_means.ndim == 0:
        step_means = np.full((ens.horizon, ens.m), float(step_means))
    elif step_means.ndim == 1:
        if step_means.size != ens.m:
            raise DimensionError(
                f"per-channel means must have {ens.m} entries, "
                f"got {step_means.size}"
            )
        step_means = np.tile(step_means, (ens.horizon, 1))
    if step_means.shape != (ens.horizon, ens.m):
        raise DimensionError(
            f"step means must have shape {(ens.horizon, ens.m)}, "
            f"got {step_means.shape}"
        )
    if np.any(step_means < 0.0) or np.any(step_means > 1.0):
        raise DimensionError("step means must lie in [0, 1]")
    return step_means


def horizon_cost_samples(
    ens: PredictionEnsemble,
    model: SystemModel,
    gain: ControllerGain,
    x: np.ndarray,
    step_means,
    samples: int,
    seed: int = 0,
) -> np.ndarray:
    """Monte-Carlo samples of the expected horizon cost at ``x``.

    ``step_means`` is a scalar, per-channel vector, or (N, m) schedule
    giving the channel law the horizon is rolled out under.  The mean of
    the returned array is an unbiased estimate of the closed-form expected
    cost for the gain's protocol (see the module docstring for why the
    tcp-like estimator uses two delivery draws per sample).
    """
    x = np.asarray(x, dtype=float)
    step_means = _expand_step_means(ens, step_means)
    thresholds = step_means.reshape(-1)

    u_star = -gain.solve(ens.cross_gram @ x)
    base = ens.state_map @ x  # (N n,)
    om = np.diagonal(model.state_penalty)
    ps = np.diagonal(model.input_penalty)
    qx = float(x @ (model.Q @ x))

    noise_rng = philox_stream(seed, 0, STREAM_NOISE)
    loss_rng = philox_stream(seed, 0, STREAM_LOSS)
    n, N = ens.n, ens.horizon
    chol = np.linalg.cholesky(model.noise_cov)
    # stacked noise: per-step blocks share the same covariance
    xi = noise_rng.standard_normal((samples, N, n)) @ chol.T
    xi = xi.reshape(samples, N * n)
    noise_part = xi @ ens.noise_map.T

    v1 = (loss_rng.random((samples, thresholds.size)) < thresholds).astype(float)
    delivered1 = v1 * u_star[None, :]
    chi1 = base[None, :] + delivered1 @ ens.input_map.T + noise_part
    input_cost = np.sum(delivered1 * ps[None, :] * delivered1, axis=1)

    if gain.protocol is Protocol.UDP_LIKE:
        state_cost = np.sum(chi1 * om[None, :] * chi1, axis=1)
    else:
        v2 = (loss_rng.random((samples, thresholds.size)) < thresholds).astype(float)
        chi2 = base[None, :] + (v2 * u_star[None, :]) @ ens.input_map.T + noise_part
        state_cost = np.sum(chi1 * om[None, :] * chi2, axis=1)

    return qx + state_cost + input_cost


def empirical_increase(
    ens: PredictionEnsemble,
    model: SystemModel,
    gain: ControllerGain,
    x: np.ndarray,
    step_means,
    samples: int,
    seed: int = 0,
):
    """Paired common-random-number estimate of the attack cost increase.

    Attacked and nominal horizon rollouts share noise and loss uniforms;
    only the thresholds differ.  Returns (mean difference, standard error
    of the mean difference).
    """
    x = np.asarray(x, dtype=float)
    attacked_thresholds = _expand_step_means(ens, step_means).reshape(-1)
    nominal_thresholds = gain.mean_stack

    u_star = -gain.solve(ens.cross_gram @ x)
    base = ens.state_map @ x
    om = np.diagonal(model.state_penalty)
    ps = np.diagonal(model.input_penalty)

    noise_rng = philox_stream(seed, 0, STREAM_NOISE)
    loss_rng = philox_stream(seed, 0, STREAM_LOSS)
    n, N = ens.n, ens.horizon
    chol = np.linalg.cholesky(model.noise_cov)
    xi = noise_rng.standard_normal((samples, N, n)) @ chol.T
    noise_part = xi.reshape(samples, N * n) @ ens.noise_map.T

    uni1 = loss_rng.random((samples, N * ens.m))
    uni2 = loss_rng.random((samples, N * ens.m))  # tcp bridge draw

    def cost_under(thresholds):
        v1 = (uni1 < thresholds[None, :]).astype(float)
        delivered = v1 * u_star[None, :]
        chi1 = base[None, :] + delivered @ ens.input_map.T + noise_part
        input_cost = np.sum(delivered * ps[None, :] * delivered, axis=1)
        if gain.protocol is Protocol.UDP_LIKE:
            state_cost = np.sum(chi1 * om[None, :] * chi1, axis=1)
        else:
            v2 = (uni2 < thresholds[None, :]).astype(float)
            chi2 = (
                base[None, :]
                + (v2 * u_star[None, :]) @ ens.input_map.T
                + noise_part
            )
            state_cost = np.sum(chi1 * om[None, :] * chi2, axis=1)
        return state_cost + input_cost  # x'Qx cancels in the pairing

    diffs = cost_under(attacked_thresholds) - cost_under(nominal_thresholds)
    mean = float(np.mean(diffs))
    se = float(np.std(diffs, ddof=1) / math.sqrt(samples))
    return mean, se
