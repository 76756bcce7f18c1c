"""Exception hierarchy shared by the simulation and estimation code."""


class IngsubError(Exception):
    """Base class for all package errors."""


class DomainError(IngsubError, ValueError):
    """An argument lies outside the domain of a function or model."""


class DegenerateInputError(DomainError):
    """Data hits a probability-zero configuration (e.g. a jump exactly at the support bound)."""


class ConvergenceError(IngsubError, RuntimeError):
    """An iterative routine exhausted its iteration budget."""


class EstimationError(IngsubError, RuntimeError):
    """An estimator could not produce a usable point estimate."""


class InfeasibleMomentsError(EstimationError):
    """No parameter pair reproduces the sample moments."""


class BracketError(EstimationError):
    """A root could not be bracketed on the admissible parameter interval."""
