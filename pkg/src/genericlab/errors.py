"""Exception hierarchy shared by all modules."""


class GenericLabError(Exception):
    """Base class for every error raised by genericlab."""


class ParseError(GenericLabError, ValueError):
    """Malformed formula or chart file.

    ``line`` and ``column`` are 1-based; ``position`` is the 0-based offset
    inside the formula text.
    """

    def __init__(self, message, position=None, line=None, column=None, text=None):
        self.message = message
        self.position = position
        self.line = line
        self.column = column
        self.text = text
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        elif position is not None:
            where.append(f"position {position}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)

    def located(self, line, column_offset=0):
        """Return a copy anchored at ``line`` of an enclosing file."""
        column = None if self.position is None else self.position + 1 + column_offset
        return type(self)(self.message, self.position, line, column, self.text)


class UnknownIdentifierError(ParseError):
    pass


class DomainError(GenericLabError, ArithmeticError):
    """A subexpression is not smooth at the evaluation point."""

    def __init__(self, message, subexpression=None):
        self.subexpression = subexpression
        if subexpression is not None:
            message = f"{message} in '{subexpression}'"
        super().__init__(message)


class SignatureError(GenericLabError, ValueError):
    """Metric value is not of Lorentzian signature (-, +, ..., +)."""


class RegionError(GenericLabError, ValueError):
    """Point lies outside the chart's declared region."""


class JetOrderError(GenericLabError, ValueError):
    """Jet order too low for the requested derivative."""


class SymmetryError(GenericLabError, ValueError):
    """Tensor violates the algebraic curvature symmetries."""
