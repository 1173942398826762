"""Exception hierarchy shared by all flatlab modules."""


class FlatlabError(Exception):
    """Base class for every error raised by flatlab."""


class InputError(FlatlabError):
    """Malformed user input (files, expressions, certificates)."""


class ParseError(InputError):
    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class UnresolvedIdentifierError(ParseError):
    pass


class FormatError(InputError):
    """Malformed system, certificate or transform file."""

    def __init__(self, message, line=None, source=None):
        where = f"{source or '<input>'}:{line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class ChartError(InputError):
    """An operation mixed objects living on incompatible charts."""


class CertificateError(InputError):
    pass


class JetOrderOverflowError(CertificateError):
    pass


class TransformError(InputError):
    pass


class NonInvertibleTransformError(TransformError):
    def __init__(self, message, rank=None):
        self.rank = rank
        super().__init__(message)


class ObstructionError(FlatlabError):
    pass


class SingularPointError(FlatlabError, ZeroDivisionError):
    """A denominator vanished at the requested evaluation point."""


class SingularityError(FlatlabError):
    """Sampling could not find enough nonsingular generic points."""


class IntegrationError(FlatlabError):
    pass
