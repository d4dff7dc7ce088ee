"""Exception hierarchy shared by the library and the command line front end."""


class HBMError(Exception):
    """Base class for all library errors."""


class DomainError(HBMError, ValueError):
    """Unsupported dimension, cutoff, or mismatched domains."""


class NotPositive(HBMError):
    """Support function is not positive (origin not interior)."""


class NotConvex(HBMError):
    """Restricted Hessian D^2 h is not positive definite somewhere."""


class NotSymmetric(HBMError):
    """Operation requires an origin-symmetric body."""


class MeanNotZero(HBMError):
    """Test function is not mean-free with respect to the required measure."""


class WrongDimension(HBMError):
    """Operation is only defined in a specific ambient dimension."""


class MaxIterExceeded(HBMError):
    """Iterative procedure did not reach its tolerance."""


class NewtonDiverged(HBMError):
    """Newton iteration failed to reduce the residual."""


class NotConvexDuringIteration(NewtonDiverged):
    """Newton iterate left the class of convex bodies and could not be repaired."""


class SolverError(HBMError):
    """Eigensolver or linear algebra failure."""
