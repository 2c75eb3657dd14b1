"""Exception types raised across the package."""


class SerpIntentError(Exception):
    """Base class for every domain error raised by serpintent."""


class SchemaError(SerpIntentError, ValueError):
    pass


class JsonError(SerpIntentError, ValueError):
    pass


class CaptchaDetected(SerpIntentError):
    pass


class EmptyQuery(SerpIntentError, ValueError):
    pass


class PreconditionError(SerpIntentError):
    pass


class SpecMismatch(SerpIntentError, ValueError):
    pass


class EmptyInput(SerpIntentError, ValueError):
    pass


class TooFewRows(SerpIntentError, ValueError):
    pass


class LengthMismatch(SerpIntentError, ValueError):
    pass


class UnnamedCluster(SerpIntentError, KeyError):
    pass


class NonBijectiveMapping(SerpIntentError, ValueError):
    pass


class ConfigError(SerpIntentError, ValueError):
    pass


class BadLabel(SerpIntentError, ValueError):
    def __init__(self, line_no: int, label: str):
        super().__init__(f"line {line_no}: unknown intent label {label!r}")
        self.line_no = line_no
        self.label = label
