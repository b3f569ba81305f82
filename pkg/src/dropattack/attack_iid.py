"""Optimal stationary (IID) packet-drop attacks against both protocols.

The attacker replaces every channel's delivery probability by a single rate
``alpha`` chosen inside the monitor's tolerance band.  With the operator's
input sequence held at its nominal gain, the expected horizon cost shifts by
a quadratic in ``alpha``:

    udp:  obj(a) = a * u'(a G_in + (1-a) D_in + P - 2 K) u
    tcp:  obj(a) = -a * u'(G_in (2 nu - a I) + P) u

where ``u`` is the nominal optimal sequence, ``G_in`` the input Gramian,
``D_in`` its diagonal, ``P`` the input penalty, ``K`` the gain kernel and
``nu`` the stacked nominal means.  Positive values mean the operator pays
more than under the nominal channel.  Being one-dimensional quadratics,
both are maximized over the admissible interval by comparing the endpoints
and, when the curve is concave, its interior stationary point; the tcp
curve is convex whenever the plant is input-reachable, so its maximum is
always at an endpoint.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSpec, DetectionSpec
from .controller import ControllerGain, Protocol, control_gain, optimal_input_sequence
from .errors import DimensionError, InfeasibleRegionError
from .model import PredictionEnsemble, SystemModel

__all__ = [
    "Convexity",
    "AttackContext",
    "ObjectiveQuadratic",
    "AttackCharacterization",
    "PerfectChannelReport",
    "attack_context",
    "udp_objective",
    "udp_objective_coeffs",
    "peak_alpha_udp",
    "optimal_alpha_udp",
    "tcp_objective",
    "tcp_objective_coeffs",
    "trough_alpha_tcp",
    "optimal_alpha_tcp",
    "perfect_channel_condition_tcp",
]


class Convexity(enum.Enum):
    CONCAVE = "concave"
    CONVEX = "convex"
    LINEAR = "linear"


@dataclass(frozen=True, eq=False)
class AttackContext:
    """Everything the attack formulas need, precomputed once per state.

    ``u_star`` caches the operator's optimal sequence at ``x`` so every
    quadratic form is evaluated against it instead of re-solving or forming
    an explicit kernel inverse.  ``region`` is the scalar admissible
    interval (the intersection of all per-channel bands), or None when the
    channels' bands do not overlap; per-channel bounds are kept separately
    for schedule attacks, which do not need a common rate.
    """

    ens: PredictionEnsemble
    gain: ControllerGain
    input_penalty: np.ndarray
    x: np.ndarray
    u_star: np.ndarray
    nominal_means: np.ndarray
    channel_lo: np.ndarray
    channel_hi: np.ndarray
    region: tuple | None

    @property
    def protocol(self) -> Protocol:
        return self.gain.protocol

    def require_region(self):
        if self.region is None:
            raise InfeasibleRegionError(
                "no single loss rate lies inside every channel's "
                "detection band; use a per-channel attack instead"
            )
        return self.region

    @property
    def nominal_scalar(self) -> float:
        """Tie-break target: the nominal rate (mean of per-channel rates)."""
        return float(np.mean(self.nominal_means))


def attack_context(
    ens: PredictionEnsemble,
    model: SystemModel,
    channel: ChannelSpec,
    detection: DetectionSpec,
    protocol: Protocol,
    x: np.ndarray,
    gain: ControllerGain | None = None,
) -> AttackContext:
    """Assemble an :class:`AttackContext` for state ``x``."""
    if channel.m != ens.m:
        raise DimensionError(
            f"channel has {channel.m} entries for {ens.m} actuator channels"
        )
    if gain is None:
        gain = control_gain(ens, model, channel.mean_diag, protocol)
    elif gain.protocol is not protocol:
        raise DimensionError("gain was built for a different protocol")
    x = np.asarray(x, dtype=float)
    u_star = optimal_input_sequence(gain, ens, x)
    lo, hi = detection.bounds(channel)
    reg_lo, reg_hi = float(np.max(lo)), float(np.min(hi))
    region = (reg_lo, reg_hi) if reg_lo <= reg_hi else None
    return AttackContext(
        ens=ens,
        gain=gain,
        input_penalty=model.input_penalty,
        x=x,
        u_star=u_star,
        nominal_means=channel.mean_diag,
        channel_lo=lo,
        channel_hi=hi,
        region=region,
    )


@dataclass(frozen=True)
class ObjectiveQuadratic:
    """The attack objective as a quadratic through the origin.

    obj(a) = curvature * a^2 + linear * a.  ``curvature`` is half the second
    derivative; its sign decides concavity and hence where the maximum sits.
    """

    linear: float
    curvature: float

    def value(self, alpha: float) -> float:
        return alpha * (self.linear + alpha * self.curvature)

    def slope(self, alpha: float) -> float:
        return self.linear + 2.0 * self.curvature * alpha

    @property
    def second_derivative(self) -> float:
        return 2.0 * self.curvature


@dataclass(frozen=True)
class AttackCharacterization:
    """Outcome of the scalar-rate attack search over one admissible band."""

    protocol: Protocol
    convexity: Convexity
    alpha_star: float
    objective_star: float
    candidates: list  # [(alpha, objective value), ...] actually compared
    alpha_peak: float | None = None  # interior stationary point, if concave
    curvature: float = 0.0
    degenerate: bool = field(default=False)  # flat objective, rate moot


def _require_protocol(ctx: AttackContext, protocol: Protocol, fname: str):
    if ctx.protocol is not protocol:
        raise DimensionError(
            f"{fname} needs a {protocol.value}-like context, got "
            f"{ctx.protocol.value}-like"
        )


def _quad(u: np.ndarray, M: np.ndarray) -> float:
    return float(u @ (M @ u))


def _curvature_scale(ctx: AttackContext) -> float:
    u2 = float(ctx.u_star @ ctx.u_star)
    return float(np.linalg.norm(ctx.ens.input_gram)) * u2


# ---------------------------------------------------------------- udp side

def udp_objective(ctx: AttackContext, alpha: float) -> float:
    """Expected-cost shift of the udp-like loop at attack rate ``alpha``."""
    _require_protocol(ctx, Protocol.UDP_LIKE, "udp_objective")
    u = ctx.u_star
    M = (
        alpha * ctx.ens.input_gram
        + np.diag((1.0 - alpha) * ctx.ens.input_gram_diag)
        + ctx.input_penalty
        - 2.0 * ctx.gain.kernel
    )
    return alpha * _quad(u, M)


def udp_objective_coeffs(ctx: AttackContext) -> ObjectiveQuadratic:
    """Linear and quadratic coefficients of the udp objective.

    The curvature is the familiar off-diagonal quadratic form
    u'(G_in - D_in)u: it vanishes identically for decoupled plants
    (A = 0 with diagonal B) and for a single-step horizon on a scalar
    plant, where every loss term is a same-entry term.
    """
    _require_protocol(ctx, Protocol.UDP_LIKE, "udp_objective_coeffs")
    u = ctx.u_star
    off = ctx.ens.input_gram - np.diag(ctx.ens.input_gram_diag)
    curvature = _quad(u, off)
    linear = (
        _quad(u, ctx.input_penalty)
        + float(u @ (ctx.ens.input_gram_diag * u))
        - 2.0 * _quad(u, ctx.gain.kernel)
    )
    return ObjectiveQuadratic(linear=linear, curvature=curvature)


def peak_alpha_udp(ctx: AttackContext, coeffs: ObjectiveQuadratic | None = None) -> float:
    """Interior stationary rate of the udp objective (its peak if concave)."""
    if coeffs is None:
        coeffs = udp_objective_coeffs(ctx)
    tol = 1e-12 * _curvature_scale(ctx)
    if abs(coeffs.curvature) <= tol:
        raise ValueError(
            "objective has no interior stationary point: curvature is zero"
        )
    return -coeffs.linear / (2.0 * coeffs.curvature)


def _classify(curvature: float, tol: float) -> Convexity:
    if curvature < -tol:
        return Convexity.CONCAVE
    if curvature > tol:
        return Convexity.CONVEX
    return Convexity.LINEAR


def _pick(candidates, nominal: float):
    # argmax by value; near-ties resolved toward the nominal rate so a
    # flat objective never sends the attacker to an arbitrary endpoint
    best = max(v for _, v in candidates)
    tol = 1e-12 * (1.0 + abs(best))
    tied = [(a, v) for a, v in candidates if best - v <= tol]
    alpha, value = min(tied, key=lambda av: abs(av[0] - nominal))
    return alpha, value


def optimal_alpha_udp(ctx: AttackContext) -> AttackCharacterization:
    """Best stationary attack rate for the udp-like loop.

    The maximum of a quadratic over an interval is at an endpoint, or at
    the interior stationary point when the curve is concave and the point
    falls inside the band.  A flat objective (zero sequence, e.g. x = 0)
    is flagged degenerate and answered with the nominal rate.
    """
    _require_protocol(ctx, Protocol.UDP_LIKE, "optimal_alpha_udp")
    lo, hi = ctx.require_region()
    coeffs = udp_objective_coeffs(ctx)
    tol = 1e-12 * _curvature_scale(ctx)
    convexity = _classify(coeffs.curvature, tol)

    slope_scale = (
        float(np.linalg.norm(ctx.input_penalty))
        + float(np.linalg.norm(ctx.ens.input_gram))
        + 2.0 * float(np.linalg.norm(ctx.gain.kernel))
    ) * float(ctx.u_star @ ctx.u_star)
    if convexity is Convexity.LINEAR and abs(coeffs.linear) <= 1e-12 * max(
        1e-300, slope_scale
    ):
        mu = min(max(ctx.nominal_scalar, lo), hi)
        return AttackCharacterization(
            protocol=Protocol.UDP_LIKE,
            convexity=convexity,
            alpha_star=mu,
            objective_star=coeffs.value(mu),
            candidates=[(mu, coeffs.value(mu))],
            alpha_peak=None,
            curvature=coeffs.curvature,
            degenerate=True,
        )

    candidates = [(lo, coeffs.value(lo)), (hi, coeffs.value(hi))]
    alpha_peak = None
    if convexity is Convexity.CONCAVE:
        alpha_peak = peak_alpha_udp(ctx, coeffs)
        if lo <= alpha_peak <= hi:
            candidates.append((alpha_peak, coeffs.value(alpha_peak)))
    alpha_star, objective_star = _pick(candidates, ctx.nominal_scalar)
    return AttackCharacterization(
        protocol=Protocol.UDP_LIKE,
        convexity=convexity,
        alpha_star=alpha_star,
        objective_star=objective_star,
        candidates=candidates,
        alpha_peak=alpha_peak,
        curvature=coeffs.curvature,
    )


# ---------------------------------------------------------------- tcp side

def tcp_objective(ctx: AttackContext, alpha: float) -> float:
    """Expected-cost shift of the tcp-like loop at attack rate ``alpha``."""
    _require_protocol(ctx, Protocol.TCP_LIKE, "tcp_objective")
    u = ctx.u_star
    scaled = ctx.ens.input_gram * (2.0 * ctx.gain.mean_stack - alpha)[None, :]
    return -alpha * _quad(u, scaled + ctx.input_penalty)


def tcp_objective_coeffs(ctx: AttackContext) -> ObjectiveQuadratic:
    """Coefficients of the tcp objective.

    Curvature u' G_in u is nonnegative, and strictly positive on
    input-reachable plants, so the curve is convex: the worst admissible
    rate is always at an endpoint of the band.
    """
    _require_protocol(ctx, Protocol.TCP_LIKE, "tcp_objective_coeffs")
    u = ctx.u_star
    curvature = _quad(u, ctx.ens.input_gram)
    linear = -(
        2.0 * float(u @ (ctx.ens.input_gram @ (ctx.gain.mean_stack * u)))
        + _quad(u, ctx.input_penalty)
    )
    return ObjectiveQuadratic(linear=linear, curvature=curvature)


def trough_alpha_tcp(ctx: AttackContext, coeffs: ObjectiveQuadratic | None = None) -> float:
    """Stationary rate of the tcp objective: the attack that HELPS most.

    Because the curve is convex this is the objective's minimizer.  It
    always exceeds the nominal rate (the slope at nominal is the negated
    input-penalty form, which is strictly negative for a nonzero
    sequence), and is returned unclamped as a diagnostic even when it
    falls outside [0, 1).
    """
    if coeffs is None:
        coeffs = tcp_objective_coeffs(ctx)
    tol = 1e-12 * _curvature_scale(ctx)
    if abs(coeffs.curvature) <= tol:
        raise ValueError(
            "objective has no interior stationary point: curvature is zero"
        )
    return -coeffs.linear / (2.0 * coeffs.curvature)


def optimal_alpha_tcp(ctx: AttackContext) -> AttackCharacterization:
    """Best stationary attack rate for the tcp-like loop (an endpoint)."""
    _require_protocol(ctx, Protocol.TCP_LIKE, "optimal_alpha_tcp")
    lo, hi = ctx.require_region()
    coeffs = tcp_objective_coeffs(ctx)
    tol = 1e-12 * _curvature_scale(ctx)
    convexity = _classify(coeffs.curvature, tol)
    if convexity is Convexity.LINEAR and abs(coeffs.linear) <= 1e-12 * max(
        1e-300,
        (
            float(np.linalg.norm(ctx.input_penalty))
            + float(np.linalg.norm(ctx.ens.input_gram))
        )
        * float(ctx.u_star @ ctx.u_star),
    ):
        mu = min(max(ctx.nominal_scalar, lo), hi)
        return AttackCharacterization(
            protocol=Protocol.TCP_LIKE,
            convexity=convexity,
            alpha_star=mu,
            objective_star=coeffs.value(mu),
            candidates=[(mu, coeffs.value(mu))],
            curvature=coeffs.curvature,
            degenerate=True,
        )
    candidates = [(lo, coeffs.value(lo)), (hi, coeffs.value(hi))]
    alpha_star, objective_star = _pick(candidates, ctx.nominal_scalar)
    return AttackCharacterization(
        protocol=Protocol.TCP_LIKE,
        convexity=convexity,
        alpha_star=alpha_star,
        objective_star=objective_star,
        candidates=candidates,
        curvature=coeffs.curvature,
    )


@dataclass(frozen=True)
class PerfectChannelReport:
    """Does delivering EVERY packet hurt the tcp-like operator?

    ``state_positive`` answers for the given state (objective at rate 1 is
    positive); ``matrix_definite`` is the state-independent sufficient
    condition, positive definiteness of

        sym(G_in (I - 2 nu)) - P.
    """

    state_positive: bool
    objective_at_one: float
    matrix_definite: bool
    min_eigenvalue: float


def perfect_channel_condition_tcp(ctx: AttackContext) -> PerfectChannelReport:
    _require_protocol(ctx, Protocol.TCP_LIKE, "perfect_channel_condition_tcp")
    g1 = tcp_objective(ctx, 1.0)
    scaled = ctx.ens.input_gram * (1.0 - 2.0 * ctx.gain.mean_stack)[None, :]
    S = 0.5 * (scaled + scaled.T) - ctx.input_penalty
    min_eig = float(np.linalg.eigvalsh(S)[0])
    return PerfectChannelReport(
        state_positive=bool(g1 > 0.0),
        objective_at_one=g1,
        matrix_definite=bool(min_eig > 0.0),
        min_eigenvalue=min_eig,
    )
