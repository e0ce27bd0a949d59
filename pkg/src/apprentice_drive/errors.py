"""Exception types shared across the package.

The CLI maps :class:`ConfigError` to exit code 2 and every other
:class:`ApprenticeError` to exit code 1.
"""


class ApprenticeError(Exception):
    pass


class ConfigError(ApprenticeError, ValueError):
    """Bad configuration value, unknown key, or a missing upstream artifact."""


class SimulationFault(ApprenticeError, RuntimeError):
    """Non-finite state or action reached the simulator."""


class DegenerateDataError(ApprenticeError, ValueError):
    pass


class AmbiguousSolutionError(ApprenticeError, ValueError):
    """Every simplex point minimizes the objective (all-zero gradient matrix)."""
