"""Exception and warning types shared across the package."""


class LatticeGibbsError(Exception):
    """Base class for all library errors."""


class RankDeficient(LatticeGibbsError):
    """Basis matrix is numerically rank deficient."""


class DimensionMismatch(LatticeGibbsError):
    """Vector or matrix dimensions do not match the basis."""


class EmptyAlphabet(LatticeGibbsError):
    """A per-coordinate candidate set is empty."""


class RetryCapExceeded(LatticeGibbsError):
    """Block rejection sampling hit the retry cap.

    Signals a standard deviation far below the validity threshold of the
    blocked sampler.
    """


class StateSpaceTooLarge(LatticeGibbsError):
    """Enumeration box exceeds the configured state-count cap."""


class PermutationSpaceTooLarge(LatticeGibbsError):
    """Analytic block-kernel averaging requested in too high a dimension."""


class NotStationary(LatticeGibbsError):
    """Kernel is not stationary with respect to the supplied target."""


class NotReversible(LatticeGibbsError):
    """Kernel fails the detailed-balance check required for symmetrization."""


class NotConverged(LatticeGibbsError):
    """Iterative procedure exceeded its step budget."""


class ConfigError(LatticeGibbsError):
    """Invalid or unknown CLI/experiment configuration."""


class NotErgodicWarning(UserWarning):
    """Spectral radius equals 1: the chain does not mix."""
