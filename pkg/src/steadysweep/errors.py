"""Exception hierarchy.

Every solver failure derives from :class:`SweepError`.  The ``exit_code``
class attribute is what the command line front end returns for it.
"""


class SweepError(Exception):
    exit_code = 4

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self):
        out = {"error": type(self).__name__, "message": str(self)}
        for key, value in self.details.items():
            try:
                out[key] = value.tolist()
            except AttributeError:
                out[key] = value
        return out


class ConfigError(SweepError, ValueError):
    exit_code = 2


# numerical failures (exit code 4)

class DomainError(SweepError, ValueError):
    """Non-finite or wrongly shaped state."""


class HyperbolicityError(SweepError):
    """State outside the hyperbolic region (complex sound speed, negative density...)."""


class InversionError(SweepError):
    """Newton inversion of the flux did not converge."""


class NearSonicError(InversionError):
    """Flux Jacobian singular during inversion."""


class StepError(SweepError):
    """Backward-Euler step past a turning point diverged."""


class WrongRootError(StepError):
    """Step past a turning point converged to the pre-sonic root."""


class DivergenceError(SweepError):
    """Time evolution blew up."""


class BracketError(SweepError, ValueError):
    """Scalar root oracle called without a sign change."""


# infeasible structures (exit code 3)

class InfeasibleError(SweepError):
    exit_code = 3


class NoTurningPointError(InfeasibleError):
    pass


class NoShockError(InfeasibleError):
    """Only the trivial root of the jump conditions was found."""


class EntropyViolationError(InfeasibleError):
    pass


class NoSolutionInBracketError(InfeasibleError):
    pass


class StructureInfeasibleError(InfeasibleError):
    pass


class IncompleteCurveError(InfeasibleError):
    def __init__(self, message, partial=None, **details):
        super().__init__(message, **details)
        self.partial = partial


class CurveLoopError(InfeasibleError):
    def __init__(self, message, partial=None, **details):
        super().__init__(message, **details)
        self.partial = partial


class CoverageError(InfeasibleError):
    pass
