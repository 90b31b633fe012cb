"""Exception hierarchy shared by all adslab modules."""


class AdslabError(Exception):
    """Base class for computational failures raised by adslab."""


class ConfigurationError(AdslabError, ValueError):
    """Invalid user input (malformed system file, bad parameters)."""


# symbol algebra


class ConstantRankViolation(AdslabError):
    """The kernel dimension of A(xi) differs between two sampled directions."""

    def __init__(self, msg, witnesses=None):
        super().__init__(msg)
        self.witnesses = witnesses


class DegenerateSymbol(ConstantRankViolation):
    """A(omega) vanishes at a sampled direction (rank 0, a special rank drop)."""


class InterpolationFailure(AdslabError):
    pass


class CayleyHamiltonResidual(AdslabError):
    pass


class ExactSequenceFailure(AdslabError):
    def __init__(self, msg, xi=None):
        super().__init__(msg)
        self.xi = xi


# root finding


class ContourThroughZero(AdslabError):
    pass


class NonConvergence(AdslabError):
    pass


# discrete generator


class ResolutionError(ConfigurationError):
    pass


class UnstableAbsorber(AdslabError):
    pass


class FactorizationSingular(AdslabError):
    pass


class NoConvergence(AdslabError):
    pass


class NearSingularSolve(AdslabError):
    pass


# perturbation tracking


class ContourNearEigenvalue(AdslabError):
    def __init__(self, msg, eigenvalue=None, delta=None):
        super().__init__(msg)
        self.eigenvalue = eigenvalue
        self.delta = delta


class QuadratureNotConverged(AdslabError):
    pass


class PathLost(AdslabError):
    def __init__(self, msg, last_delta=None, table=None):
        super().__init__(msg)
        self.last_delta = last_delta
        self.table = table


# semigroup


class StepRejected(AdslabError):
    pass


# fredholm lab


class BasepointRegular(AdslabError):
    pass


class TruncationInconclusive(AdslabError):
    pass


class CircleHitsSingularity(AdslabError):
    pass
