"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    pass


class NumericOverflowError(ArithmeticError):
    """A forward or backward pass produced a non-finite value."""

    def __init__(self, gate, timestep=None, epoch=None):
        self.gate = gate
        self.timestep = timestep
        self.epoch = epoch
        where = []
        if epoch is not None:
            where.append(f"epoch {epoch}")
        if timestep is not None:
            where.append(f"timestep {timestep}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(f"non-finite value in '{gate}'{suffix}")


class ConditionViolationError(ValueError):
    """Raised when a variance configuration fails its initialization condition.

    The validator's report is kept on ``.report`` so callers can show which
    clause failed.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ParseError(ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedMissingValueError(ParseError):
    pass


class ConstantFeatureError(ValueError):
    def __init__(self, feature):
        self.feature = feature
        super().__init__(f"feature {feature} is constant; cannot standardize")
