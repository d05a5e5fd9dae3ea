"""Exception hierarchy shared across the package."""


class CiscatError(Exception):
    """Base class for all package-specific errors."""


class FieldError(CiscatError):
    """Invalid field data (non-finite values, shape/grid mismatch, bad dump)."""


class ConfigError(CiscatError):
    """Invalid configuration.

    ``errors`` holds one human-readable record per problem so callers can
    report every issue at once instead of failing on the first.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SingularBasisError(CiscatError):
    """A grid node coincides with a conical intersection; the adiabatic basis
    is undefined there."""


class GaugeSingularityError(CiscatError):
    """Gauge potential requested at (or too close to) a conical intersection."""


class DegenerateCIError(CiscatError):
    """Vanishing coupling Jacobian at a conical intersection; the crossing is
    not linear and the sign rule does not apply."""


class QuadratureError(CiscatError):
    """Loop quadrature failed to converge within the sample budget."""


class NodalCrossingError(CiscatError):
    """A winding loop crosses a nodal structure where the phase is undefined."""


class MatchingError(CiscatError):
    """Ill-conditioned partial-wave matching (vanishing denominator)."""


class TruncationError(CiscatError):
    """Partial-wave sum not converged at the requested order."""


class DivergenceError(CiscatError):
    """Evaluation requested at a point where the expression diverges."""


class NumericalInstabilityError(CiscatError):
    """Propagation produced unphysical norm growth."""


class UnresolvedCandidateWarning(UserWarning):
    """A crossing-point candidate cell did not converge under Newton
    refinement; the candidate is reported, not silently dropped."""
