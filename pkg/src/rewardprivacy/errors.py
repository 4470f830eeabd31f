"""Exception types shared across the package."""


class RewardPrivacyError(Exception):
    """Base class for all errors raised by this package."""


class EmptyDemonstrations(RewardPrivacyError, ValueError):
    pass


class InfeasibleThreshold(RewardPrivacyError, ValueError):
    pass


class LambdaCapTooSmall(RewardPrivacyError, ValueError):
    pass


class DegenerateVariance(RewardPrivacyError, ValueError):
    pass


class DegenerateSupport(RewardPrivacyError, ValueError):
    pass


class DimensionMismatch(RewardPrivacyError, ValueError):
    pass


class ConfigError(RewardPrivacyError):
    """Raised when an experiment or CLI config cannot be used."""


class ParseError(ConfigError):
    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ValidationError(ConfigError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
