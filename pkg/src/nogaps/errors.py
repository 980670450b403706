"""Exception types raised across the package."""

import numpy as np


class NoGapsError(Exception):
    """Base class for errors raised by this package."""


class RankDeficient(NoGapsError, np.linalg.LinAlgError):
    """Numerical rank below what the operation needs."""


class NoConvergence(NoGapsError, np.linalg.LinAlgError):
    pass


class SingularSubmatrix(NoGapsError, np.linalg.LinAlgError):
    pass


class SingularSystem(NoGapsError, np.linalg.LinAlgError):
    pass


class NonOrthogonalGenerators(NoGapsError, ValueError):
    pass


class PreconditionViolated(NoGapsError, ValueError):
    """A checker was called on an instance that does not meet its hypotheses.

    ``failures`` lists the names of the hypotheses that failed.
    """

    def __init__(self, failures):
        if isinstance(failures, str):
            failures = [failures]
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class HypothesisViolated(PreconditionViolated):
    pass


class CertificateInvalid(NoGapsError):
    pass


class LatticePointNotFound(NoGapsError):
    pass


class BudgetExceeded(NoGapsError):
    """Search stopped before the space was exhausted."""


class DegenerateGrid(NoGapsError, ValueError):
    pass


class ConfigInvalid(NoGapsError, ValueError):
    pass


class PartialFailure(NoGapsError):
    """Too many trials hit numerical errors; ``summary`` holds what was computed."""

    def __init__(self, message, summary=None):
        super().__init__(message)
        self.summary = summary


class FieldMismatch(NoGapsError, ValueError):
    """Real and complex operands mixed where the operation forbids it."""
