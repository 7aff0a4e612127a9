"""Exception types raised across the package."""


class MonoportError(Exception):
    """Base class for all package errors."""


class ShapeError(MonoportError, ValueError):
    """Signals or operators with incompatible sizes, periods or directions."""


class DomainError(MonoportError, ValueError):
    """An element law was evaluated outside its domain."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnsupportedElementError(MonoportError, TypeError):
    """The requested operation is not available for this element variant."""


class NumericalError(MonoportError, ArithmeticError):
    """A factorization or eigen-solve failed numerically."""


class BracketError(NumericalError):
    """No sign change could be bracketed for a scalar root solve."""


class IntegrationDomainError(MonoportError, RuntimeError):
    """A memristive state left its admissible box during integration."""


class SteadyStateError(MonoportError, RuntimeError):
    """The period map did not settle within the allowed number of periods."""


class StructuralError(MonoportError, ValueError):
    """A circuit does not have the structure required by the chosen solver."""


class ParseError(MonoportError, ValueError):
    """Malformed netlist text.  Carries a 1-based line and column."""

    def __init__(self, message, line, column):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column
