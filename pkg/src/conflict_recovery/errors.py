"""Exception types raised across the package."""


class ConflictRecoveryError(Exception):
    """Base class for all package errors."""


class DegenerateGeometry(ConflictRecoveryError):
    """Two aircraft are already closer than the separation norm."""


class TangentGeometry(ConflictRecoveryError):
    """Initial distance equals (or is below) the separation norm; conflict lines coincide."""


class DegenerateRecovery(ConflictRecoveryError):
    """Turn point coincides with the target while a heading deviation is active."""


class TooDense(ConflictRecoveryError):
    """A benchmark generator could not place aircraft at least ``d`` apart."""


class Infeasible(ConflictRecoveryError):
    """No feasible solution was found for a stage."""


class TimeLimit(ConflictRecoveryError):
    """A stage ran out of time before producing any incumbent."""


class ParseError(ConflictRecoveryError):
    """A scenario or solution file is malformed."""

    def __init__(self, message, *, path=None, field=None, line=None):
        self.path = path
        self.field = field
        self.line = line
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ": ".join([", ".join(where)]) if where else ""
        super().__init__(f"{prefix}: {message}" if prefix else message)
