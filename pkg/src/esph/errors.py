"""Exception hierarchy shared by every module of the toolkit."""

from __future__ import annotations


class EsphError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(EsphError, ValueError):
    """Inconsistent dimensions, bad parameters or an invalid run config."""


class SolverError(EsphError):
    """A time step could not be completed."""

    def __init__(self, message: str, step: int | None = None, iterate=None, residual_norm: float | None = None):
        self.step = step
        self.iterate = iterate
        self.residual_norm = residual_norm
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class NewtonDivergence(SolverError):
    """Newton hit its iteration cap or produced a non-finite iterate."""


class SingularJacobian(SolverError):
    """The Newton Jacobian could not be factorized."""


class SingularMassOperator(SolverError):
    """``-omega + rho`` is not invertible, so no explicit ODE form exists."""


class MalformedTrajectoryError(EsphError, ValueError):
    """Per-step arrays of a trajectory do not line up with its states."""
