"""Exception types shared across the package."""


class SurfStokesError(Exception):
    """Base class for all package errors."""


class NonConvergence(SurfStokesError):
    """Closest-point Newton iteration failed to converge."""


class OutsideTube(SurfStokesError):
    """Query point lies outside the configured tubular neighborhood."""


class DegenerateElement(SurfStokesError):
    """Element map has non-positive metric determinant."""


class NonPositiveJacobian(SurfStokesError):
    """Surface area ratio is non-positive (mesh too coarse or inverted)."""


class SingularFactor(SurfStokesError):
    """Inverse Piola factor is singular (normals nearly orthogonal)."""


class NearTangentPlaneFlip(SurfStokesError):
    """Node-transfer normals are too far apart for a stable transfer."""


class UnsupportedDegree(SurfStokesError):
    """Requested polynomial/quadrature degree is out of the supported range."""


class SingularSystem(SurfStokesError):
    """Saddle-point factorization failed."""


class SolverDivergence(SurfStokesError):
    """Linear solve did not reach the required residual."""


class EigensolveFailure(SurfStokesError):
    """Generalized eigenvalue solve for the inf-sup estimate failed."""


class StepTooSmall(SurfStokesError):
    """Finite-difference step hit the cancellation floor."""


class InsufficientData(SurfStokesError):
    """Not enough records to compute convergence rates."""
