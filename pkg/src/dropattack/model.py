"""Plant and horizon-prediction model for control over a lossy actuation link.

The plant is linear with additive Gaussian noise,

    x(k+1) = A x(k) + B V(k) u(k) + w(k),

where V(k) is a diagonal 0/1 matrix of per-channel packet outcomes (1 means
the actuator command was delivered).  Stacking the next ``N`` states gives
the prediction used by the receding-horizon controller,

    chi = state_map @ x + input_map @ (nu * ups) + noise_map @ xi,

with ``ups`` the stacked input sequence, ``nu`` the stacked loss outcomes and
``xi`` the stacked process noise.  The quadratic-cost Gramians of those three
maps (and the cross term between input and state maps) are what every
downstream formula consumes, so they are assembled once here and reused.

Diagonal matrices are passed around as 1-D arrays of their diagonals wherever
that is unambiguous (loss outcomes, channel means); penalty matrices are kept
2-D because their shapes encode the horizon layout.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = [
    "SystemModel",
    "PredictionEnsemble",
    "ReachabilityReport",
    "build_prediction_ensemble",
    "step_plant",
    "check_reachable",
]


def _frozen(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def _require_diagonal_spd(M, name, shape):
    if M.shape != shape:
        raise DimensionError(
            f"{name} must have shape {shape}, got {M.shape}"
        )
    if np.count_nonzero(M - np.diag(np.diagonal(M))):
        raise DimensionError(f"{name} must be diagonal")
    if np.any(np.diagonal(M) <= 0.0):
        raise DimensionError(f"{name} must have strictly positive diagonal")


def _require_sym_pd(M, name, n):
    if M.shape != (n, n):
        raise DimensionError(f"{name} must have shape {(n, n)}, got {M.shape}")
    scale = max(1.0, float(np.abs(M).max()))
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * scale):
        raise DimensionError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise DimensionError(f"{name} must be positive definite") from None


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Plant matrices, cost weights and noise statistics.

    Attributes
    ----------
    A, B : ndarray
        Plant dynamics (n, n) and input map (n, m).
    Q : ndarray
        Diagonal positive weight (n, n) on the state at the decision step.
    state_penalty : ndarray
        Diagonal positive weight (N*n, N*n) on the predicted state stack.
    input_penalty : ndarray
        Diagonal positive weight (N*m, N*m) on the delivered-input stack.
    noise_cov : ndarray
        Process-noise covariance (n, n), symmetric positive definite.
    init_cov, init_mean : ndarray
        First and second moments of the initial state.
    horizon : int
        Prediction length N >= 1.
    """

    A: np.ndarray
    B: np.ndarray
    Q: np.ndarray
    state_penalty: np.ndarray
    input_penalty: np.ndarray
    noise_cov: np.ndarray
    init_cov: np.ndarray
    init_mean: np.ndarray
    horizon: int

    def __post_init__(self):
        A = _frozen(self.A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        B = _frozen(self.B)
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionError(
                f"B must have {n} rows to match A, got shape {B.shape}"
            )
        m = B.shape[1]
        N = int(self.horizon)
        if N < 1:
            raise DimensionError(f"horizon must be >= 1, got {self.horizon}")
        Q = _frozen(self.Q)
        Om = _frozen(self.state_penalty)
        Ps = _frozen(self.input_penalty)
        _require_diagonal_spd(Q, "Q", (n, n))
        _require_diagonal_spd(Om, "state_penalty", (N * n, N * n))
        _require_diagonal_spd(Ps, "input_penalty", (N * m, N * m))
        Sw = _frozen(self.noise_cov)
        Sx = _frozen(self.init_cov)
        _require_sym_pd(Sw, "noise_cov", n)
        _require_sym_pd(Sx, "init_cov", n)
        xb = _frozen(self.init_mean)
        if xb.shape != (n,):
            raise DimensionError(
                f"init_mean must have shape {(n,)}, got {xb.shape}"
            )
        for name, val in (
            ("A", A), ("B", B), ("Q", Q), ("state_penalty", Om),
            ("input_penalty", Ps), ("noise_cov", Sw), ("init_cov", Sx),
            ("init_mean", xb),
        ):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "horizon", N)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True, eq=False)
class PredictionEnsemble:
    """Stacked prediction maps and their cost Gramians.

    ``state_map`` is (N*n, n): rows are A, A^2, ..., A^N.  ``input_map`` is
    (N*n, N*m) block lower triangular with block (i, j) = A^(i-j) B, and
    ``noise_map`` is its square analogue with B replaced by the identity.
    The Gramians are taken against ``state_penalty``:

        state_gram = state_map' W state_map      (n, n)
        input_gram = input_map' W input_map      (N*m, N*m)
        noise_gram = noise_map' W noise_map      (N*n, N*n)
        cross_gram = input_map' W state_map      (N*m, n)

    ``input_gram_diag`` is the 1-D diagonal of ``input_gram`` (the Hadamard
    mask that separates same-entry loss terms from cross terms), and
    ``noise_cov`` is the block-diagonal covariance of the stacked noise.
    """

    state_map: np.ndarray
    input_map: np.ndarray
    noise_map: np.ndarray
    state_gram: np.ndarray
    input_gram: np.ndarray
    noise_gram: np.ndarray
    cross_gram: np.ndarray
    input_gram_diag: np.ndarray
    noise_cov: np.ndarray
    n: int
    m: int
    horizon: int

    def noise_cost_trace(self) -> float:
        """Expected stacked-noise cost, trace(noise_gram @ noise_cov)."""
        return float(np.sum(self.noise_gram * self.noise_cov.T))


def build_prediction_ensemble(model: SystemModel) -> PredictionEnsemble:
    """Assemble the stacked prediction maps and Gramians for ``model``."""
    A, B, W = model.A, model.B, model.state_penalty
    n, m, N = model.n, model.m, model.horizon

    # powers[p] = A^p, p = 0..N
    powers = [np.eye(n)]
    for _ in range(N):
        powers.append(A @ powers[-1])

    state_map = np.vstack(powers[1:])

    input_map = np.zeros((N * n, N * m))
    noise_map = np.zeros((N * n, N * n))
    for i in range(N):
        for j in range(i + 1):
            input_map[i * n:(i + 1) * n, j * m:(j + 1) * m] = powers[i - j] @ B
            noise_map[i * n:(i + 1) * n, j * n:(j + 1) * n] = powers[i - j]

    w_state = W @ state_map
    w_input = W @ input_map
    state_gram = state_map.T @ w_state
    input_gram = input_map.T @ w_input
    noise_gram = noise_map.T @ (W @ noise_map)
    cross_gram = input_map.T @ w_state

    noise_cov = np.zeros((N * n, N * n))
    for i in range(N):
        noise_cov[i * n:(i + 1) * n, i * n:(i + 1) * n] = model.noise_cov

    return PredictionEnsemble(
        state_map=_frozen(state_map),
        input_map=_frozen(input_map),
        noise_map=_frozen(noise_map),
        state_gram=_frozen(state_gram),
        input_gram=_frozen(input_gram),
        noise_gram=_frozen(noise_gram),
        cross_gram=_frozen(cross_gram),
        input_gram_diag=_frozen(np.diagonal(input_gram).copy()),
        noise_cov=_frozen(noise_cov),
        n=n,
        m=m,
        horizon=N,
    )


def step_plant(model: SystemModel, x, u_applied, v, w):
    """One plant step: A x + B (v * u) + w.

    ``v`` is the per-channel 0/1 delivery outcome as a 1-D array; a dropped
    packet zeroes the corresponding input entry exactly.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u_applied, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != (model.n,):
        raise DimensionError(f"x must have shape {(model.n,)}, got {x.shape}")
    if u.shape != (model.m,) or v.shape != (model.m,):
        raise DimensionError(
            f"u_applied and v must have shape {(model.m,)}, "
            f"got {u.shape} and {v.shape}"
        )
    if w.shape != (model.n,):
        raise DimensionError(f"w must have shape {(model.n,)}, got {w.shape}")
    return model.A @ x + model.B @ (v * u) + w


@dataclass(frozen=True)
class ReachabilityReport:
    reachable: bool
    rank: int
    max_rank: int
    threshold: float


def check_reachable(model: SystemModel) -> ReachabilityReport:
    """Rank test on [B, AB, ..., A^(N-1) B] over the prediction horizon.

    ``reachable`` is true when the numerical rank equals the maximal rank the
    stack could possibly have, min(n, N*m).  The singular-value threshold is
    the usual max-dimension * eps * largest-singular-value cutoff.
    """
    n, m, N = model.n, model.m, model.horizon
    blocks = []
    P = np.eye(n)
    for _ in range(N):
        blocks.append(P @ model.B)
        P = model.A @ P
    K = np.hstack(blocks)
    sv = np.linalg.svd(K, compute_uv=False)
    threshold = max(K.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > threshold))
    max_rank = min(n, N * m)
    return ReachabilityReport(
        reachable=(rank == max_rank),
        rank=rank,
        max_rank=max_rank,
        threshold=float(threshold),
    )
