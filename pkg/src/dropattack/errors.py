"""Exception types shared across the package."""

__all__ = [
    "DropAttackError",
    "DimensionError",
    "ConfigError",
    "InfeasibleRegionError",
    "NumericalError",
]


class DropAttackError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(DropAttackError, ValueError):
    """A matrix or vector has the wrong shape, or violates a structural
    requirement (symmetry, diagonality, positive definiteness)."""


class ConfigError(DropAttackError, ValueError):
    """An experiment configuration failed validation.  Carries the full
    list of problems so a user can fix them in one pass."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InfeasibleRegionError(DropAttackError, ValueError):
    """The admissible attack region is empty (no single loss rate is
    consistent with every channel's detection bounds)."""


class NumericalError(DropAttackError, RuntimeError):
    """A linear solve or factorization failed, or produced non-finite
    values.  Deliberately not silently repaired with pseudo-inverses."""
