"""Exception types shared across the package."""


class BerwaldError(Exception):
    """Base class for all package errors."""


class SingularMetricError(BerwaldError):
    """Metric determinant below tolerance at an evaluation point."""


class DegenerateHessianError(BerwaldError):
    """Velocity Hessian of a Lagrangian is singular at an evaluation point."""


class InadmissibleError(BerwaldError):
    """A Lagrangian was evaluated outside its admissible cone."""


class NullOneFormError(BerwaldError):
    """The one-form has (near-)null metric norm where a nonzero norm is required."""


class DegenerateOneFormError(BerwaldError):
    """The one-form (nearly) vanishes at every usable sample point."""


class InsufficientDirectionsError(BerwaldError):
    """Too few admissible directions to fit a quadratic form."""


class InsufficientSpreadError(BerwaldError):
    """Sampled one-form norms do not spread over enough bins to resolve a profile."""


class NoSubcaseError(BerwaldError):
    """The fitted constants fall outside every constructive subcase."""


class DegenerateLagrangianError(BerwaldError):
    """A constructed Lagrangian failed the nondegeneracy scan."""


class UndefinedResidualError(BerwaldError):
    """A residual is requested where its normalizing derivative vanishes."""


class IntegrationError(BerwaldError):
    """Trajectory integration blew up or left the field domain."""


class ConfigError(BerwaldError):
    """Scenario configuration failed validation.

    Carries a list of (path, message) pairs covering every problem found.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "; ".join(f"{path}: {msg}" for path, msg in self.problems)
        super().__init__(f"invalid configuration: {lines}")
