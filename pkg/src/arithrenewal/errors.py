"""Exception hierarchy shared by all modules."""


class ArithRenewalError(Exception):
    """Base class for every error raised by the package."""


class InvalidLaw(ArithRenewalError, ValueError):
    pass


class NoCommonSpan(ArithRenewalError, ValueError):
    pass


class SpanMismatch(ArithRenewalError, ValueError):
    pass


class ZeroAtomPresent(ArithRenewalError, ValueError):
    pass


class ZeroMassTail(ArithRenewalError, ValueError):
    pass


class NoCramerRoot(ArithRenewalError, ValueError):
    pass


class PositiveDrift(ArithRenewalError, ValueError):
    pass


class DivergentTilt(ArithRenewalError, ValueError):
    pass


class MassExceedsOne(ArithRenewalError, ValueError):
    pass


class WrongRegime(ArithRenewalError, ValueError):
    pass


class NonconvergentU(ArithRenewalError, ValueError):
    pass


class WindowTooWide(ArithRenewalError, RuntimeError):
    pass


class DecayViolation(ArithRenewalError, ValueError):
    pass


class SumDivergence(ArithRenewalError, RuntimeError):
    pass


class QuadratureDivergence(ArithRenewalError, RuntimeError):
    pass


class InsufficientTailSamples(ArithRenewalError, ValueError):
    pass


class InvalidQ(ArithRenewalError, ValueError):
    pass


class NonContractive(ArithRenewalError, ValueError):
    pass


class NotAB0Pair(ArithRenewalError, ValueError):
    pass


class SandwichViolated(ArithRenewalError, RuntimeError):
    def __init__(self, message, theta=None, x=None):
        super().__init__(message)
        self.theta = theta
        self.x = x


class ConfigError(ArithRenewalError, ValueError):
    pass
