"""Exception hierarchy shared by all coneflow modules."""


class ConeflowError(Exception):
    """Base class for all library errors."""


class InvalidInput(ConeflowError):
    """Malformed argument: wrong dimension, empty sample set, bad parameter."""


class OutsideCone(ConeflowError):
    """A tangent vector required to lie in a cone does not."""


class InvalidCone(ConeflowError):
    """Cone data violates solidity/pointedness/representation consistency."""


class WrongConeKind(ConeflowError):
    """Operation requires a specific cone field (e.g. the constant orthant)."""


class LeftDomain(ConeflowError):
    """A trajectory left the declared chart domain (positive half-line <= 0)."""


class Diverged(ConeflowError):
    """State or variational norm exceeded the divergence guard."""


class EvaluationError(ConeflowError):
    """Vector field or Jacobian produced NaN/Inf."""


class NonContractive(ConeflowError):
    """Perron-Frobenius iteration plateaued above tolerance."""


class NeedsDenserGrid(ConeflowError):
    """Sampled field too sparse for the requested finite difference."""


class NoPeriod(ConeflowError):
    """Too few Poincare-section crossings to estimate a period."""


class NotHyperbolic(ConeflowError):
    """Fixed point fails the hyperbolic-saddle precondition."""


class InvalidSpec(ConeflowError):
    """Unknown model name or out-of-domain model parameters."""
