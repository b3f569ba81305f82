"""Bernoulli packet channel, empirical-mean monitor and RNG streams.

Each actuator channel drops packets independently: the i-th diagonal entry
of the loss matrix at step k is 1 with probability mean_i.  The operator
watches the running empirical delivery rate of every channel and flags the
link as soon as any rate leaves the declared tolerance band

    |observed_mean_i - mean_i| <= tol_i        (boundary inclusive).

An attacker who keeps the per-step means inside that band therefore stays
undetected up to the usual concentration error of the empirical mean.

Randomness is organized as named counter-based streams: every
(seed, realization, purpose) triple owns an independent Philox generator, so
noise draws are identical across runs that differ only in their attack, and
simulations are reproducible bit for bit regardless of evaluation order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

__all__ = [
    "ChannelSpec",
    "DetectionSpec",
    "MonitorState",
    "philox_stream",
    "STREAM_NOISE",
    "STREAM_LOSS",
    "STREAM_INIT",
    "sample_losses",
    "fresh_monitor",
    "update_monitor",
    "in_safe_region",
]

# purpose tags for philox_stream keys
STREAM_NOISE = 0
STREAM_LOSS = 1
STREAM_INIT = 2


def philox_stream(*key) -> np.random.Generator:
    """Independent counter-based generator for an integer key tuple."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=[int(k) for k in key]))
    )


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """Nominal per-channel delivery probabilities, each in [0, 1)."""

    mean_diag: np.ndarray

    def __post_init__(self):
        md = np.array(self.mean_diag, dtype=float)
        if md.ndim != 1 or md.size == 0:
            raise DimensionError("mean_diag must be a non-empty 1-D array")
        if np.any(md < 0.0) or np.any(md >= 1.0):
            raise DimensionError("channel means must lie in [0, 1)")
        md.setflags(write=False)
        object.__setattr__(self, "mean_diag", md)

    @property
    def m(self) -> int:
        return self.mean_diag.size


@dataclass(frozen=True, eq=False)
class DetectionSpec:
    """Per-channel tolerance band half-widths, each nonnegative.

    ``bounds`` gives the admissible mean interval for each channel, clamped
    to the unit interval: [max(0, mean - tol), min(1, mean + tol)].  The
    nominal mean always lies inside its own band, so the band is never
    empty; an attacker constrained to a single shared rate may still face an
    empty intersection across channels, which callers must handle.
    """

    tol_diag: np.ndarray

    def __post_init__(self):
        td = np.array(self.tol_diag, dtype=float)
        if td.ndim != 1 or td.size == 0:
            raise DimensionError("tol_diag must be a non-empty 1-D array")
        if np.any(td < 0.0):
            raise DimensionError("detection tolerances must be >= 0")
        td.setflags(write=False)
        object.__setattr__(self, "tol_diag", td)

    def bounds(self, channel: ChannelSpec):
        if self.tol_diag.size != channel.m:
            raise DimensionError(
                f"tol_diag has {self.tol_diag.size} entries for "
                f"{channel.m} channels"
            )
        lo = np.maximum(0.0, channel.mean_diag - self.tol_diag)
        hi = np.minimum(1.0, channel.mean_diag + self.tol_diag)
        return lo, hi


def sample_losses(mean_diag: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One step of per-channel 0/1 delivery outcomes, as floats.

    Drawn by thresholding uniforms, so coupling two channel laws through a
    shared stream yields common-random-number pairs.
    """
    mean_diag = np.asarray(mean_diag, dtype=float)
    return (rng.random(mean_diag.shape) < mean_diag).astype(float)


@dataclass(frozen=True, eq=False)
class MonitorState:
    """Running per-channel delivery counts after ``steps`` observed steps.

    ``means`` is counts/steps, or NaN before the first observation.
    """

    steps: int
    counts: np.ndarray
    means: np.ndarray


def fresh_monitor(m: int) -> MonitorState:
    return MonitorState(
        steps=0, counts=np.zeros(m), means=np.full(m, np.nan)
    )


def update_monitor(state: MonitorState, v: np.ndarray) -> MonitorState:
    """Fold one loss outcome into the running empirical means."""
    v = np.asarray(v, dtype=float)
    if v.shape != state.counts.shape:
        raise DimensionError(
            f"v must have shape {state.counts.shape}, got {v.shape}"
        )
    counts = state.counts + v
    steps = state.steps + 1
    return MonitorState(steps=steps, counts=counts, means=counts / steps)


def in_safe_region(
    observed: np.ndarray, channel: ChannelSpec, detection: DetectionSpec
) -> bool:
    """Elementwise |observed - mean| <= tol, boundary inclusive."""
    observed = np.asarray(observed, dtype=float)
    dev = np.abs(observed - channel.mean_diag)
    return bool(np.all(dev <= detection.tol_diag))
