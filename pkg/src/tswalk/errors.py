class ValidationError(ValueError):
    """Input violates a documented precondition."""


class ParseError(ValidationError):
    """Malformed input file."""


class DegenerateCensusError(ValidationError):
    pass
