"""Exception hierarchy shared across the package."""


class DelaySOFError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(DelaySOFError, ValueError):
    pass


class NonpositiveDelayError(DelaySOFError, ValueError):
    pass


class NonfiniteEntryError(DelaySOFError, ValueError):
    pass


class OutOfDomainError(DelaySOFError, ValueError):
    pass


class EmptyBatchError(DelaySOFError, ValueError):
    pass


class NonfiniteGradientError(DelaySOFError, ValueError):
    pass


class NonfiniteStateError(DelaySOFError, ArithmeticError):
    """Raised when a rollout leaves the representable range.

    ``time`` is the first grid time at which a state entry exceeded the
    overflow threshold.
    """

    def __init__(self, time: float):
        super().__init__(f"state overflow at t={time:.6g}")
        self.time = time


class ConfigError(DelaySOFError, ValueError):
    """Malformed, incomplete or over-specified run configuration."""


class UnknownKeyError(ConfigError):
    def __init__(self, key: str, where: str = "config"):
        super().__init__(f"unknown key {key!r} in {where}")
        self.key = key


class MissingRequiredError(ConfigError):
    pass
