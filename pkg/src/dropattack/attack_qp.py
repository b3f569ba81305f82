"""Non-stationary packet-drop attacks: one loss rate per step and channel.

Letting the attacker vary the per-step means over the prediction horizon
turns the scalar quadratic of the stationary attack into a box-constrained
quadratic program.  Writing ``z`` for the stacked per-step, per-channel
rates (step-major, matching the input stack) and ``U = u u'`` for the outer
product of the operator's optimal sequence, the expected-cost shift is

    obj(z) = z' H z + c' z

with, for the udp-like loop,

    H = (G_in - D_in) o U
    c = -[(D_in + P + 2 (G_in - D_in) Nu) U]_diag

and for the tcp-like loop

    H = G_in o U
    c = -[(P + 2 G_in Nu) U]_diag

(``o`` elementwise product, ``Nu`` the stacked nominal means, ``_diag`` the
matrix diagonal).  Restricted to a constant schedule z = a 1 these reduce
exactly to the stationary objectives, so the best schedule can never lose
to the best stationary rate once the stationary optimum is kept as a
candidate.

The maximization is NOT a convex program (for udp H is traceless, hence
indefinite whenever it is nonzero), so the solver is deliberately plain:
exhaustive vertex enumeration for small problems, monotone projected
gradient ascent from many starts for the rest, and explicit candidate
bookkeeping so ties break toward the nominal rates.
"""

from dataclasses import dataclass

import numpy as np

from .attack_iid import AttackContext
from .controller import Protocol
from .errors import DimensionError

__all__ = [
    "BoxQP",
    "SolverSettings",
    "AttackSchedule",
    "build_qp_udp",
    "build_qp_tcp",
    "schedule_objective",
    "solve_box_qp_max",
    "solve_iid_constrained",
]


@dataclass(frozen=True, eq=False)
class BoxQP:
    """maximize z' H z + c' z subject to lo <= z <= hi elementwise.

    ``index_map[i]`` gives the (horizon step, actuator channel) pair of
    decision entry i; ``nominal`` holds the stacked nominal rates, used only
    to break ties and seed the solver.
    """

    H: np.ndarray
    c: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    index_map: tuple
    nominal: np.ndarray
    horizon: int
    m: int

    def objective(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        return float(z @ (self.H @ z) + self.c @ z)


@dataclass(frozen=True)
class SolverSettings:
    multistarts: int = 32
    max_iterations: int = 500
    backtrack: float = 0.5
    stationarity_tol: float = 1e-8
    vertex_cap: int = 16  # exhaustive enumeration up to 2^cap vertices
    seed: int = 0


@dataclass(frozen=True, eq=False)
class AttackSchedule:
    """A per-step deliverability schedule and the objective it achieves.

    ``means[k, i]`` is the delivery probability of channel i at horizon
    step k.  ``winner`` records which candidate family produced the
    returned point; ``stationarity`` is the projected-gradient residual
    there (unit step), zero at an exactly optimal vertex.
    """

    means: np.ndarray
    objective: float
    winner: str
    stationarity: float

    def as_stack(self) -> np.ndarray:
        """Step-major flattening matching the decision vector layout."""
        return self.means.reshape(-1).copy()


def _build_qp(ctx: AttackContext, coupling: np.ndarray, load: np.ndarray) -> BoxQP:
    u = ctx.u_star
    U = np.outer(u, u)
    H = coupling * U
    H = 0.5 * (H + H.T)
    # c_i = -[(load) U]_ii = -u_i * (load @ u)_i
    c = -(u * (load @ u))
    N, m = ctx.ens.horizon, ctx.ens.m
    return BoxQP(
        H=H,
        c=c,
        lo=np.tile(ctx.channel_lo, N),
        hi=np.tile(ctx.channel_hi, N),
        index_map=tuple((k, i) for k in range(N) for i in range(m)),
        nominal=np.tile(ctx.nominal_means, N),
        horizon=N,
        m=m,
    )


def build_qp_udp(ctx: AttackContext) -> BoxQP:
    """Schedule-attack QP for the udp-like loop."""
    if ctx.protocol is not Protocol.UDP_LIKE:
        raise DimensionError("build_qp_udp needs a udp-like context")
    off = ctx.ens.input_gram - np.diag(ctx.ens.input_gram_diag)
    load = (
        np.diag(ctx.ens.input_gram_diag)
        + ctx.input_penalty
        + 2.0 * off * ctx.gain.mean_stack[None, :]
    )
    return _build_qp(ctx, off, load)


def build_qp_tcp(ctx: AttackContext) -> BoxQP:
    """Schedule-attack QP for the tcp-like loop."""
    if ctx.protocol is not Protocol.TCP_LIKE:
        raise DimensionError("build_qp_tcp needs a tcp-like context")
    load = (
        ctx.input_penalty
        + 2.0 * ctx.ens.input_gram * ctx.gain.mean_stack[None, :]
    )
    return _build_qp(ctx, ctx.ens.input_gram, load)


def schedule_objective(qp: BoxQP, schedule: np.ndarray) -> float:
    """Objective of a (horizon, m) schedule under ``qp``."""
    schedule = np.asarray(schedule, dtype=float)
    if schedule.shape != (qp.horizon, qp.m):
        raise DimensionError(
            f"schedule must have shape {(qp.horizon, qp.m)}, "
            f"got {schedule.shape}"
        )
    return qp.objective(schedule.reshape(-1))


# ------------------------------------------------------------- solver core

def _batch_objective(H, c, Z):
    return np.einsum("sd,de,se->s", Z, H, Z, optimize=True) + Z @ c


def _residuals(H, c, lo, hi, Z):
    G = 2.0 * Z @ H + c
    proj = np.clip(Z + G, lo, hi)
    return np.max(np.abs(proj - Z), axis=1)


def _ascend(H, c, lo, hi, Z0, settings: SolverSettings):
    """Monotone projected gradient ascent, batched over starting points."""
    Z = Z0.copy()
    vals = _batch_objective(H, c, Z)
    eigs = np.linalg.eigvalsh(H)
    lipschitz = 2.0 * max(float(np.abs(eigs).max()), 1e-300)
    t = np.full(Z.shape[0], 1.0 / lipschitz)
    tol = settings.stationarity_tol * (1.0 + float(np.linalg.norm(c)))
    for _ in range(settings.max_iterations):
        res = _residuals(H, c, lo, hi, Z)
        live = (res > tol) & (t > 1e-18)
        if not live.any():
            break
        G = 2.0 * Z @ H + c
        trial = np.clip(Z + t[:, None] * G, lo, hi)
        tvals = _batch_objective(H, c, trial)
        accept = live & (tvals >= vals)
        Z[accept] = trial[accept]
        vals[accept] = tvals[accept]
        reject = live & ~accept
        t[reject] *= settings.backtrack
        t[accept] *= 1.25  # cheap recovery after over-shrinking
    return Z, vals


def _maximize_box(H, c, lo, hi, nominal, settings: SolverSettings):
    """Candidate-based maximization of z'Hz + c'z over a box.

    Returns (z, value, winner, residual).  Candidate families: the nominal
    point, exhaustive vertices (small d), the unconstrained stationary
    point when H is negative definite, and projected gradient ascent from
    multiple starts.
    """
    d = c.size
    if d == 0:
        raise DimensionError("empty decision vector")
    if np.any(lo > hi):
        raise DimensionError("box has lo > hi entries")

    def val(z):
        return float(z @ (H @ z) + c @ z)

    candidates = [(np.clip(nominal, lo, hi), "nominal")]

    if d <= settings.vertex_cap:
        idx = np.arange(2 ** d, dtype=np.uint32)
        bits = ((idx[:, None] >> np.arange(d)) & 1).astype(float)
        V = lo + bits * (hi - lo)
        vv = _batch_objective(H, c, V)
        candidates.append((V[int(np.argmax(vv))].copy(), "vertex"))

    eig_max = float(np.linalg.eigvalsh(H)[-1])
    if eig_max < 0.0:
        # strictly concave: the unconstrained peak is the global maximizer
        # whenever it is feasible
        z_int = np.linalg.solve(-2.0 * H, c)
        if np.all(z_int >= lo) and np.all(z_int <= hi):
            candidates.append((z_int, "interior"))

    rng = np.random.default_rng(settings.seed)
    starts = [np.clip(nominal, lo, hi), 0.5 * (lo + hi)]
    starts += [z for z, _ in candidates[1:]]
    while len(starts) < settings.multistarts:
        if len(starts) % 2:
            z = lo + rng.random(d) * (hi - lo)
        else:
            z = lo + rng.integers(0, 2, d) * (hi - lo)
        starts.append(z)
    Z0 = np.array(starts[: settings.multistarts])
    Z, vals = _ascend(H, c, lo, hi, Z0, settings)
    candidates.append((Z[int(np.argmax(vals))].copy(), "gradient"))

    scored = [(z, val(z), tag) for z, tag in candidates]
    best_val = max(s for _, s, _ in scored)
    tol = 1e-12 * (1.0 + abs(best_val))
    tied = [item for item in scored if best_val - item[1] <= tol]
    z, value, winner = min(
        tied, key=lambda item: float(np.linalg.norm(item[0] - nominal))
    )
    residual = float(_residuals(H, c, lo, hi, z[None, :])[0])
    return z, value, winner, residual


def solve_box_qp_max(qp: BoxQP, settings: SolverSettings = SolverSettings()) -> AttackSchedule:
    """Best schedule attack for ``qp``.

    The stationary (per-channel constant) optimum is always kept as a
    candidate, so the result never falls below it: varying the schedule can
    only help.
    """
    iid = solve_iid_constrained(qp, settings)
    z, value, winner, residual = _maximize_box(
        qp.H, qp.c, qp.lo, qp.hi, qp.nominal, settings
    )
    if iid.objective > value + 1e-12 * (1.0 + abs(value)):
        z, value, winner = iid.as_stack(), iid.objective, "iid"
        residual = float(_residuals(qp.H, qp.c, qp.lo, qp.hi, z[None, :])[0])
    return AttackSchedule(
        means=z.reshape(qp.horizon, qp.m),
        objective=value,
        winner=winner,
        stationarity=residual,
    )


def solve_iid_constrained(qp: BoxQP, settings: SolverSettings = SolverSettings()) -> AttackSchedule:
    """Best schedule constant in time: one rate per channel.

    Substituting z = R a (R the 0/1 map repeating each channel's rate over
    the horizon) reduces the QP to m variables, solved by the same
    candidate machinery.  On a single shared channel this reproduces the
    stationary-rate closed forms: endpoints, plus the interior peak when
    the reduced curvature is negative.
    """
    d = qp.c.size
    m = qp.m
    R = np.zeros((d, m))
    for i, (_, ch) in enumerate(qp.index_map):
        R[i, ch] = 1.0
    Hr = R.T @ qp.H @ R
    Hr = 0.5 * (Hr + Hr.T)
    cr = R.T @ qp.c
    lo_r = qp.lo[:m].copy()
    hi_r = qp.hi[:m].copy()
    nominal_r = qp.nominal[:m].copy()
    a, value, winner, _ = _maximize_box(Hr, cr, lo_r, hi_r, nominal_r, settings)
    z = R @ a
    residual = float(_residuals(qp.H, qp.c, qp.lo, qp.hi, z[None, :])[0])
    return AttackSchedule(
        means=np.tile(a, (qp.horizon, 1)),
        objective=qp.objective(z),
        winner=f"iid-{winner}",
        stationarity=residual,
    )
