"""
Exception hierarchy for the speed-limit toolkit.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 1.
"""


class SpeedLimitError(Exception):
    """Root of every error raised by this package."""


class ConfigurationError(SpeedLimitError, ValueError):
    """Invalid configuration, system construction or protocol domain."""


class ApplicabilityError(ConfigurationError):
    """A bound was requested outside the force regime it is proven for."""

    def __init__(self, kind: str, precondition: str):
        self.kind = kind
        self.precondition = precondition
        super().__init__(f"{kind} is not applicable: {precondition}")


class NumericalError(SpeedLimitError, ArithmeticError):
    """Loss of positive definiteness, ill-conditioning or a corrupted input."""


class OracleError(NumericalError):
    """A verification oracle could not produce a trustworthy value."""
