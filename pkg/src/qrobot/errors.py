"""Exception types shared across the package.

The CLI maps these onto distinct exit statuses: configuration/usage problems
exit 2, guard and budget violations exit 3, I/O failures exit 4.
"""


class QRobotError(Exception):
    """Base class for package errors."""


class ConfigError(QRobotError, ValueError):
    """Invalid task or run configuration (bad dimension, target, flag value)."""


class NonInjectiveMapError(QRobotError):
    """A component map sent two support labels to the same label (non-unitary)."""


class MicroProgramError(QRobotError):
    """The per-component program hit an unreachable label or ran past its guard."""


class GuardError(QRobotError):
    """A combinatorial or resource guard was exceeded (path-sum size, memory budget)."""


class RegisterUnderflowError(QRobotError, ValueError):
    """Decrement attempted on a zero register; the program tests for zero first."""
