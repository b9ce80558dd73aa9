"""Exception types. Each carries the CLI exit code it maps to."""


class HdpccError(Exception):
    exit_code = 1


class ValidationError(HdpccError):
    exit_code = 3


class ParseError(ValidationError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class DomainError(ValidationError):
    pass


class ConflictError(ValidationError):
    pass


class CompletenessError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class ConfigError(ValidationError):
    def __init__(self, msg, keys=()):
        self.keys = list(keys)
        super().__init__(msg)


class CalibrationError(ValidationError):
    pass


class NumericError(HdpccError):
    exit_code = 4


class TruncationError(NumericError):
    pass


class IntegrityError(HdpccError):
    exit_code = 5


class StateAuditError(HdpccError):
    exit_code = 5
