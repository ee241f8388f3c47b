"""Exception hierarchy shared by all modules.

Each class maps to a process exit code in the CLI: usage errors exit 2,
numerical failures exit 3, infeasible parameter selections exit 4.
"""


class QsdLabError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(QsdLabError):
    """Caller violated a precondition (bad dimensions, empty plans, ...)."""

    exit_code = 2


class ConfigError(UsageError):
    """A run configuration violates one or more cross-field constraints.

    Carries the full list of violations so a config can be fixed in one pass.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DomainError(QsdLabError):
    """A state left the admissible position set where the force is finite."""

    exit_code = 2


class NumericalError(QsdLabError):
    """Numerical failure during simulation or estimation."""

    exit_code = 3


class NumericalBlowup(NumericalError):
    """A trajectory produced a non-finite state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class SingularityStall(NumericalError):
    """Step-size control underflowed next to the singular set.

    Carries the last valid state so callers can report where it happened.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class ExtinctionError(NumericalError):
    """Every particle of an interacting ensemble died in a single step."""


class OracleError(NumericalError):
    """The grid oracle failed to converge; carries the last residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InfeasibleError(QsdLabError):
    """No parameter choice satisfies the requested drift inequalities.

    The message names the violated condition.
    """

    exit_code = 4
