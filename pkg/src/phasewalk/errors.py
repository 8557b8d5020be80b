"""Exception hierarchy shared by all phasewalk modules."""


class PhaseWalkError(Exception):
    """Base class for every error raised by this package."""


# dynamics
class NonPositiveApexHeight(PhaseWalkError, ValueError):
    pass


class InconsistentOmega(PhaseWalkError, ValueError):
    pass


class MaxSamplesExceeded(PhaseWalkError, RuntimeError):
    pass


# manifold
class DomainError(PhaseWalkError, ValueError):
    pass


class EmptyInterval(PhaseWalkError, ValueError):
    pass


class GridMismatch(PhaseWalkError, ValueError):
    pass


# planner
class StepError(PhaseWalkError):
    """Planner failure tagged with the index of the offending step."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class TransitionNotFound(StepError, ValueError):
    pass


class LateralSearchFailed(StepError, RuntimeError):
    pass


class NoConvergence(LateralSearchFailed):
    pass


class OutOfBounds(LateralSearchFailed):
    pass


class UnreachableStep(StepError, ValueError):
    pass


# contact forces
class DegenerateContacts(PhaseWalkError, ValueError):
    pass


class RankDeficient(PhaseWalkError, ValueError):
    pass


# recovery
class GridTooCoarse(PhaseWalkError, ValueError):
    pass


class OutOfGrid(PhaseWalkError, ValueError):
    pass


class InfeasibleApex(PhaseWalkError, ValueError):
    pass


class PolicyFormatError(PhaseWalkError, ValueError):
    pass


# hybrid automaton
class IllegalEdge(PhaseWalkError, ValueError):
    pass


class WalkFailed(StepError, RuntimeError):
    def __init__(self, message: str, step: int | None = None, cause: str = ""):
        self.cause = cause
        super().__init__(message, step)


# harness
class ConfigError(PhaseWalkError, ValueError):
    pass
