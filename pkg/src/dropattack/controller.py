"""Receding-horizon controllers for the lossy actuation link.

Two acknowledgement disciplines are supported.  Under the TCP-like protocol
the operator learns each packet's fate, so only the expected delivery rate
enters the input-sequence gain.  Under the UDP-like protocol no
acknowledgements arrive and the gain additionally carries the per-entry
delivery variance (the diagonal of the input Gramian weighted by the missing
mass of each channel).

Both controllers minimize the same horizon-quadratic cost and produce a
stacked input sequence that is linear in the current state,

    ups = -gain_kernel^{-1} @ cross_gram @ x,

of which only the first input block is transmitted each step.
"""

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericalError
from .model import PredictionEnsemble, SystemModel

__all__ = [
    "Protocol",
    "ControllerGain",
    "control_gain",
    "optimal_input_sequence",
    "apply_receding_horizon",
    "nominal_expected_cost",
]


class Protocol(enum.Enum):
    """Acknowledgement discipline of the actuation link."""

    TCP_LIKE = "tcp"
    UDP_LIKE = "udp"

    @classmethod
    def parse(cls, text: str) -> "Protocol":
        table = {"tcp": cls.TCP_LIKE, "udp": cls.UDP_LIKE}
        try:
            return table[str(text).strip().lower()]
        except KeyError:
            raise ValueError(
                f"protocol must be 'tcp' or 'udp', got {text!r}"
            ) from None


@dataclass(frozen=True, eq=False)
class ControllerGain:
    """Input-sequence gain kernel for one protocol and channel law.

    ``kernel`` is the (N*m, N*m) matrix inverted (implicitly, via a stored
    factorization) against ``cross_gram @ x``.  ``mean_stack`` is the
    stacked per-step channel mean diagonal as a 1-D array of length N*m.
    ``condition`` is the 2-norm condition number of the kernel, kept as a
    diagnostic because a nearly singular kernel poisons every attack formula
    downstream.
    """

    kernel: np.ndarray
    mean_stack: np.ndarray
    protocol: Protocol
    condition: float
    _solve: object  # callable rhs -> kernel^{-1} rhs

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """kernel^{-1} @ rhs without forming an explicit inverse."""
        out = self._solve(rhs)
        if not np.all(np.isfinite(out)):
            raise NumericalError("gain solve produced non-finite values")
        return out


def _make_solver(kernel: np.ndarray):
    # Cholesky when the kernel is symmetric (homogeneous channel means make
    # it so); heterogeneous means scale its columns and break symmetry, in
    # which case plain LU is the honest choice.
    sym = np.allclose(kernel, kernel.T, rtol=0.0,
                      atol=1e-12 * max(1.0, float(np.abs(kernel).max())))
    try:
        if sym:
            cf = scipy.linalg.cho_factor(kernel, check_finite=False)
            return lambda rhs: scipy.linalg.cho_solve(cf, rhs,
                                                      check_finite=False)
        lu = scipy.linalg.lu_factor(kernel, check_finite=False)
        return lambda rhs: scipy.linalg.lu_solve(lu, rhs, check_finite=False)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f"gain kernel factorization failed: {e}") from e


def stack_channel_means(mean_diag: np.ndarray, horizon: int) -> np.ndarray:
    """Tile the per-channel means over the horizon (step-major), 1-D."""
    mean_diag = np.asarray(mean_diag, dtype=float)
    return np.tile(mean_diag, horizon)


def control_gain(
    ens: PredictionEnsemble,
    model: SystemModel,
    mean_diag: np.ndarray,
    protocol: Protocol,
) -> ControllerGain:
    """Build the input-sequence gain kernel for the given channel means.

    ``mean_diag`` holds the per-channel delivery probabilities, each in
    [0, 1).  TCP-like kernel:  input_penalty + input_gram * means.
    UDP-like adds the diagonal correction input_gram_diag * (1 - means).
    """
    mean_diag = np.asarray(mean_diag, dtype=float)
    if mean_diag.shape != (ens.m,):
        raise DimensionError(
            f"mean_diag must have shape {(ens.m,)}, got {mean_diag.shape}"
        )
    if np.any(mean_diag < 0.0) or np.any(mean_diag >= 1.0):
        raise DimensionError("channel means must lie in [0, 1)")
    nu = stack_channel_means(mean_diag, ens.horizon)
    kernel = model.input_penalty + ens.input_gram * nu[None, :]
    if protocol is Protocol.UDP_LIKE:
        kernel = kernel + np.diag(ens.input_gram_diag * (1.0 - nu))
    condition = float(np.linalg.cond(kernel))
    return ControllerGain(
        kernel=kernel,
        mean_stack=nu,
        protocol=protocol,
        condition=condition,
        _solve=_make_solver(kernel),
    )


def optimal_input_sequence(
    gain: ControllerGain, ens: PredictionEnsemble, x: np.ndarray
) -> np.ndarray:
    """Stacked optimal input sequence -kernel^{-1} cross_gram x, length N*m."""
    x = np.asarray(x, dtype=float)
    if x.shape != (ens.n,):
        raise DimensionError(f"x must have shape {(ens.n,)}, got {x.shape}")
    return -gain.solve(ens.cross_gram @ x)


def apply_receding_horizon(sequence: np.ndarray, m: int) -> np.ndarray:
    """First input block of a stacked sequence (the only one transmitted)."""
    sequence = np.asarray(sequence, dtype=float)
    if sequence.ndim != 1 or sequence.size % m:
        raise DimensionError(
            f"sequence length {sequence.size} is not a multiple of m={m}"
        )
    return sequence[:m].copy()


def nominal_expected_cost(
    ens: PredictionEnsemble,
    model: SystemModel,
    gain: ControllerGain,
    x: np.ndarray,
) -> float:
    """Expected horizon cost at ``x`` under the nominal channel law.

    The closed form is

        x' (Q + state_gram) x + trace(noise_gram @ noise_cov)
          + ups' D(means) (2 cross_gram x + (input_gram D(means)
          + input_penalty [+ diag correction for UDP]) ups)

    with ups the optimal sequence and D(means) the stacked mean diagonal.
    The bracketed matrix is exactly the gain kernel, so the feedback term
    collapses to ups' D(means) cross_gram x; the long form is kept because
    it is the one the attack formulas perturb.
    """
    x = np.asarray(x, dtype=float)
    ups = optimal_input_sequence(gain, ens, x)
    nu = gain.mean_stack
    fx = ens.cross_gram @ x
    inner = ens.input_gram * nu[None, :] + model.input_penalty
    if gain.protocol is Protocol.UDP_LIKE:
        inner = inner + np.diag(ens.input_gram_diag * (1.0 - nu))
    feedback = float(ups @ (nu * (2.0 * fx + inner @ ups)))
    const = float(x @ (model.Q + ens.state_gram) @ x)
    return const + ens.noise_cost_trace() + feedback
