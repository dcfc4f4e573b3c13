"""Exception hierarchy shared by all modules."""


class RobinTorsionError(Exception):
    """Base class for every error raised by the package."""


class NumericalFailure(RobinTorsionError):
    """A numerical procedure could not deliver a trustworthy result."""


class PositivityViolation(RobinTorsionError):
    """The polar radius r(theta) is not strictly positive."""


class InvertedElement(NumericalFailure):
    """The mapped mesh has a non-positive Jacobian somewhere."""


class SingularSystem(NumericalFailure):
    """The Robin system is (numerically) singular: -beta hits the Steklov spectrum."""


class NonConvergence(NumericalFailure):
    """An iterative linear solver stalled."""


class EigenNonConvergence(NumericalFailure):
    """The Steklov eigen-solver failed."""


class OrderTooLow(RobinTorsionError):
    """A second-order quantity was requested from a P1 solution."""


class WindowTooSmall(RobinTorsionError):
    """The computed Steklov window does not reach |beta|."""


class OutsideBall(RobinTorsionError):
    """A radial formula was evaluated outside its ball."""


class AdmissibilityLost(NumericalFailure):
    """A perturbed or evolved domain made beta inadmissible."""


class StepFailure(NumericalFailure):
    """Backtracking line search exhausted its budget."""


class ConfigError(RobinTorsionError):
    """An experiment configuration is invalid."""
