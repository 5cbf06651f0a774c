"""Exception hierarchy shared by all numerical routines.

Every failure that reflects a numerical condition (rather than a programming
error) derives from :class:`NumericalError`, so front-ends can map them to a
single exit status and a structured report.
"""


class NumericalError(Exception):
    """Base class for numerical failures.

    Parameters
    ----------
    message : str
        Human readable description.
    **details
        Extra machine-readable context, exposed through :meth:`to_dict`.
    """

    def __init__(self, message="", **details):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_dict(self):
        out = {"error": type(self).__name__, "message": self.message}
        for key, val in self.details.items():
            out[key] = _jsonable(val)
        return out


def _jsonable(val):
    if isinstance(val, (list, tuple)):
        return [_jsonable(v) for v in val]
    if isinstance(val, dict):
        return {str(k): _jsonable(v) for k, v in val.items()}
    if isinstance(val, complex):
        return [val.real, val.imag]
    if isinstance(val, (str, int, float, bool)) or val is None:
        return val
    try:
        return float(val)
    except (TypeError, ValueError):
        return str(val)


class RealityViolation(NumericalError):
    """A quantity that must be real carries a non-negligible imaginary part."""


class NoContraction(NumericalError):
    """A fixed-point iteration failed to contract."""


class OutOfDomain(NumericalError):
    """Iterates left the declared domain of definition."""


class StepFailure(NumericalError):
    """An ODE integration could not reach the requested tolerance."""


class DivergedIteration(NumericalError):
    """A refinement loop kept increasing its residual."""


class RationalInput(NumericalError):
    """A number expected to be irrational is numerically rational."""


class ResonantFrequency(NumericalError):
    """A frequency satisfies an exact resonance relation."""


class SmallDivisorBreach(NumericalError):
    """Some divisor fell below the configured floor.

    ``offending`` lists ``(k, modulus)`` pairs.
    """

    def __init__(self, message="", offending=(), **details):
        super().__init__(message, offending=list(offending), **details)
        self.offending = list(offending)


class NoTwist(NumericalError):
    """The twist condition (monotone frequency map) fails."""


class SmallnessViolation(NumericalError):
    """A perturbation is too large for the requested step."""


class NewtonDiverged(NumericalError):
    """Newton iteration did not converge."""


class BranchViolation(NumericalError):
    """A square-root branch was requested outside its domain."""


class GeometryViolation(NumericalError):
    """Geometric preconditions of a potential-theoretic bound fail."""
