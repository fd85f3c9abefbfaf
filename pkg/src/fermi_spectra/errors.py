"""Exception hierarchy shared across the package."""


class FermiSpectraError(Exception):
    """Base class for all library errors."""


class NonHermitianError(FermiSpectraError):
    """Input matrix fails the Hermitian symmetry tolerance."""


class ConvergenceError(FermiSpectraError):
    """An iterative kernel (eigensolver / SVD) failed to converge."""


class EmptyEigenspaceError(FermiSpectraError):
    """No eigenvalue lies within the requested tolerance of the target."""


class InvalidStateError(FermiSpectraError):
    """Density matrix violates positivity or normalization."""


class NotNormalError(FermiSpectraError):
    """Element fails the normality check A A* = A* A."""


class NotEigenstateError(FermiSpectraError):
    """State does not pass the eigenstate criterion required as a precondition."""


class NotProjectionError(FermiSpectraError):
    """Matrix is not an orthogonal projection."""


class NullWeightError(FermiSpectraError):
    """State gives (numerically) zero weight to the projection."""


class DimensionMismatchError(FermiSpectraError):
    """Operands have incompatible dimensions."""


class NonPositiveDeltaError(FermiSpectraError):
    """Gap parameter must be strictly positive."""


class UnresolvedCriticalPointsError(FermiSpectraError):
    """Two derivative sign changes inside a single grid cell."""


class CriticalValueError(FermiSpectraError):
    """The level is a critical value of the map (derivative below the floor)."""


class EmptyFiberError(FermiSpectraError):
    """The level lies outside the range of the map."""


class RangeMismatchError(FermiSpectraError):
    """Outer map is not defined on the range of the inner map."""


class EmptyFermiSurfaceError(FermiSpectraError):
    """The level does not intersect any band range."""


class CriticalLevelError(FermiSpectraError):
    """A level-set node has gradient magnitude at or below the floor."""


class GapViolationError(FermiSpectraError):
    """The local gap between the level and the rest of the fiber spectrum closes."""


class NormalizationError(FermiSpectraError):
    """Total raw quadrature weight is not positive."""


class ZeroLambdaError(FermiSpectraError):
    """Fermi eigenstates are defined for nonzero spectral values only."""


class NonPositiveGammaError(FermiSpectraError):
    """Stagger potential must be strictly positive."""


class LambdaOutOfBandError(FermiSpectraError):
    """Spectral value lies outside the band."""


class ExtremeLevelError(FermiSpectraError):
    """Spectral value sits at a band edge where the level set degenerates."""
