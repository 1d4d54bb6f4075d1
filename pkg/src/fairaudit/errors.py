"""Exception types raised by the auditing toolkit."""


class FairAuditError(Exception):
    """Base class for every error this package raises on purpose."""


class InvalidInput(FairAuditError, ValueError):
    pass


class ParseError(InvalidInput):
    """Malformed input file; ``location`` names the offending row or JSON path."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class EmptyVersionSpace(FairAuditError):
    pass


class NonRealizableOracle(FairAuditError):
    """The oracle's answers are inconsistent with every hypothesis in the class."""


class NoQueryNeeded(FairAuditError):
    pass


class Infeasible(FairAuditError):
    pass


class SizeLimit(FairAuditError):
    pass


class DegenerateClass(FairAuditError):
    pass


class FeasibilityTimeout(FairAuditError):
    pass


class NoCrossing(FairAuditError):
    pass


class NotPSD(FairAuditError, ValueError):
    pass


class TransportError(FairAuditError):
    pass
