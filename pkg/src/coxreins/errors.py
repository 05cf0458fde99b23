"""Exception hierarchy shared by every module of the package."""


class CoxReinsError(Exception):
    """Base class for all package errors."""


class DivergentMoment(CoxReinsError, ArithmeticError):
    """An exponentially weighted claim moment is infinite."""


class QuadratureFailure(CoxReinsError):
    """Numerical integration did not reach the requested tolerance."""


class NonFiniteState(CoxReinsError, FloatingPointError):
    """A simulated state variable became NaN or infinite."""


class MajorantBreach(CoxReinsError):
    """A thinning proposal found an intensity above its dominating rate."""


class InsufficientReplications(CoxReinsError):
    """Monte Carlo standard error is too large relative to the estimate."""


class ConcavityViolated(CoxReinsError):
    """The reinsurance objective is not strictly concave in the retention."""


class RootBracketFailure(CoxReinsError):
    """The first-order condition does not change sign on [0, 1]."""


class GuardViolated(CoxReinsError):
    """A precondition of an exponential-claims closed form does not hold."""


class DegenerateVolatility(CoxReinsError):
    """The asset volatility is (numerically) zero on a sampled state."""


class ConfigInvalid(CoxReinsError, ValueError):
    """A scenario configuration failed validation.

    ``errors`` holds ``(field_path, message)`` pairs.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"{path}: {msg}" for path, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class AssumptionsViolated(CoxReinsError):
    """A fatal hypothesis check failed before an experiment could run."""

    def __init__(self, report):
        self.report = report
        names = ", ".join(c.name for c in report.fatal)
        super().__init__(f"fatal assumption checks failed: {names}")
