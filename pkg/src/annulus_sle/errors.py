"""Exception types shared across the package."""


class DomainError(ValueError):
    """Arguments outside the mathematical domain of an operation."""


class PoleError(DomainError):
    """Evaluation requested too close to a pole of a kernel or field.

    Carries the nearest lattice pole so ODE steppers can react.
    """

    def __init__(self, message, nearest_pole=None):
        super().__init__(message)
        self.nearest_pole = nearest_pole


class StiffnessError(RuntimeError):
    """Step rejection cascade fell below the minimum step size."""

    def __init__(self, message, t=None, location=None):
        super().__init__(message)
        self.t = t
        self.location = location


class CollisionError(RuntimeError):
    """Two drivers of a pair flow collided."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class ProbeError(RuntimeError):
    """A derivative probe was swallowed; retry with a smaller offset."""


class CoverageError(ValueError):
    """A lookup table or translate family does not cover the request."""


class PrecisionError(RuntimeError):
    """Monte Carlo inputs too noisy for a stable derived quantity."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes


class EstimatorInvalidError(ValueError):
    """Estimator parameters violate a validity constraint."""


class NumericError(RuntimeError):
    """A numeric routine failed to reach its tolerance."""

    def __init__(self, message, achieved_tol=None):
        super().__init__(message)
        self.achieved_tol = achieved_tol
