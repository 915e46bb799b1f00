"""Exception taxonomy shared by every module.

Two families matter to callers: ConfigError for problems that make a run
plan invalid before any numerics happen, and GuardError for numerical
preconditions that fail at runtime.  The command line tool maps them to
exit codes 2 and 3 respectively.
"""


class QfluidsError(Exception):
    """Base class for all package errors."""


class ConfigError(QfluidsError):
    """Invalid configuration, arguments, or run plan."""


class SchemaError(ConfigError):
    """An artifact file does not match its declared layout."""


class EmptyPlan(ConfigError):
    """A sweep or bench plan resolved to zero work items."""


class GuardError(QfluidsError):
    """A numerical precondition was violated at runtime."""


class NonZeroMean(GuardError):
    """Operand must be mean-zero but is not."""


class MeanNotOne(GuardError):
    """Operand must be a probability density with unit mean."""


class OriginEvaluation(GuardError):
    """Kernel evaluated too close to the lattice origin."""


class CflViolation(GuardError):
    """Advective CFL bound exceeded for the requested step."""


class NotDivergenceFree(GuardError):
    """Velocity field carries non-negligible divergence."""


class PhaseResolution(GuardError):
    """Potential phase increment per step exceeds pi."""


class ResolutionGuard(GuardError):
    """Grid cannot resolve the requested oscillation scale."""


class GridMismatch(GuardError):
    """Fields living on different grids were combined."""


class EmptyHistory(GuardError):
    """A time integral was requested over an empty history."""


class NegativeDensity(GuardError):
    """A sampling density takes negative values."""
