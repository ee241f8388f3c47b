"""Simulation and estimation toolkit for killed kinetic processes.

Provides the three thermostated dynamics (kinetic Langevin, generalized
Langevin with one auxiliary chain, Nose-Hoover), exponential Lyapunov
weights with numerical drift-condition verification, and Monte-Carlo /
grid-based estimators for quasi-stationary distributions, decay rates and
conditioned-law convergence.
"""

__version__ = "0.1.0"

from .errors import (
    UsageError,
    DomainError,
    ConfigError,
    InfeasibleError,
    NumericalBlowup,
    SingularityStall,
    ExtinctionError,
    OracleError,
)

__all__ = [
    "UsageError",
    "DomainError",
    "ConfigError",
    "InfeasibleError",
    "NumericalBlowup",
    "SingularityStall",
    "ExtinctionError",
    "OracleError",
    "__version__",
]
