"""Exception types shared across the toolkit."""


class PlatoonKitError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(PlatoonKitError):
    """Invalid scenario or configuration input; message names the offending key."""


class InvalidInputError(PlatoonKitError, ValueError):
    """Non-finite or out-of-domain numeric input."""


class NumericalError(PlatoonKitError):
    """Base class for failures of numerical routines."""


class StationaryDistributionError(NumericalError):
    """Gilbert chain has no unique stationary distribution (P + Q = 0)."""


class InsufficientDataError(NumericalError):
    """An estimator was given an empty sample."""


class UnstableLoopError(NumericalError):
    """A transfer function or error system required to be stable is not."""


class PoleOnAxisError(NumericalError):
    """Frequency response requested at a pole on the imaginary axis."""


class NonHurwitzError(NumericalError):
    """Lyapunov equation has no unique PSD solution because A is not Hurwitz."""


class InsufficientHorizonWarning(UserWarning):
    """Impulse-response integral truncated before its tail decayed."""
