"""Exception hierarchy shared by every module.

Domain errors (bad geometry, violated constraints) and convergence errors are
kept apart so the command line can map them to distinct exit codes.
"""


class PseudocurveError(Exception):
    """Base class for all library errors."""


class DomainError(PseudocurveError):
    """Input is well formed but geometrically or analytically invalid."""


class ConvergenceError(PseudocurveError):
    """An iterative procedure did not reach its tolerance."""


class DegenerateBasis(DomainError):
    pass


class NotOnQuadric(DomainError):
    pass


class NotAComplexStructure(DomainError):
    pass


class NotElliptic(DomainError):
    pass


class NotTotallyReal(DomainError):
    pass


class MeanDegenerate(DomainError):
    pass


class RankDeficient(DomainError):
    pass


class NotGraph(DomainError):
    pass


class NotGraphWarning(UserWarning):
    """Issued instead of raising :class:`NotGraph` when a local patch is still usable."""


class GridTooCoarse(DomainError):
    pass


class DomainEscape(DomainError):
    pass


class UnknownName(DomainError):
    pass


class ConstraintViolated(DomainError):
    def __init__(self, message, sample=None, residual=None):
        super().__init__(message)
        self.sample = sample
        self.residual = residual


class Degenerate(DomainError):
    pass


class StencilDegenerate(DomainError):
    pass


class PathInconsistency(DomainError):
    pass


class NoConvergence(ConvergenceError):
    """Iteration stalled; ``best`` carries the last iterate or residual."""

    def __init__(self, message, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history


class TracingFailure(ConvergenceError):
    pass
