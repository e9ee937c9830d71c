"""Exception hierarchy shared across the package."""


class MnarLogitError(Exception):
    """Base class for every error raised by :mod:`mnarlogit`.

    ``step`` is filled in by the two-stage pipeline to record which stage
    (1 = smoother, 2 = marginal selection fit, 3 = corrected outcome fit)
    raised the error. It stays ``None`` when the error is raised outside
    the pipeline.
    """

    step = None


class InputError(MnarLogitError, ValueError):
    """Malformed or out-of-contract input."""


class ConfigError(InputError):
    """Invalid simulation or CLI configuration."""


class DegenerateDataError(MnarLogitError, ValueError):
    """The data cannot support the requested fit (empty subsample, one class)."""


class SingularDesignError(MnarLogitError, ValueError):
    """Design matrix is column-rank deficient."""


class SeparationError(MnarLogitError, ArithmeticError):
    """Coefficients diverge: (quasi-)complete separation."""

    def __init__(self, message, coef=None):
        super().__init__(message)
        self.coef = coef


class NonConvergenceError(MnarLogitError, ArithmeticError):
    """IRLS hit ``max_iter``; ``last_fit`` holds the final iterate."""

    def __init__(self, message, last_fit=None):
        super().__init__(message)
        self.last_fit = last_fit


class NumericalError(MnarLogitError, ArithmeticError):
    """A quantity left its mathematical domain (e.g. log of a non-positive value)."""


class IdentificationError(MnarLogitError, ArithmeticError):
    """The selection-on-outcome coefficient has no finite solution.

    Raised when the coefficient on the outcome-probability covariate of the
    marginal selection model is ``>= 1``.
    """

    def __init__(self, message, gamma_hat=None, gamma_se=None):
        super().__init__(message)
        self.gamma_hat = gamma_hat
        self.gamma_se = gamma_se


class DegenerateConditionError(MnarLogitError, ArithmeticError):
    """Conditioning event has (numerically) zero probability."""


class BootstrapFailureError(MnarLogitError, RuntimeError):
    """Too many bootstrap replicates failed."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = failures or {}


class McFailureError(MnarLogitError, RuntimeError):
    """More than half of the Monte Carlo replications failed for the corrected estimator."""

    def __init__(self, message, failures=None, report=None):
        super().__init__(message)
        self.failures = failures or {}
        self.report = report
