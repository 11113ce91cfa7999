"""Exception taxonomy shared across the package."""


class SonFlowError(Exception):
    """Base class for all errors raised by this package."""


class AdmissionError(SonFlowError):
    """A matrix failed the invariant checks of its value type."""


class SingularInput(SonFlowError):
    """Input matrix is numerically singular; no meaningful projection exists."""


class BaseMismatch(SonFlowError):
    """Two tangent vectors are attached to different base points."""


class NotCritical(SonFlowError):
    """An operation defined only at critical points was called elsewhere."""


class BadIndex(SonFlowError):
    """Component index k outside {0, ..., floor(n/2)}."""


class ComponentMismatch(SonFlowError):
    """Endpoints of a connecting curve lie in different critical components."""


class NoNegativePair(SonFlowError):
    """No pair of -1 eigenvectors exists (k = 0 has no unstable direction)."""


class AmbiguousTrace(SonFlowError):
    """Trace of a near-critical matrix is not close to any admissible value."""


class NumericalFailure(SonFlowError):
    """Integration produced a state that fails rotation-matrix admission."""
