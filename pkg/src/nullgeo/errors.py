"""Exception hierarchy.

Errors are grouped by how the command line reports them: definition and
expression syntax problems exit with 1, violated numerical preconditions
exit with 2 and failed tolerance checks exit with 3.
"""


class NullGeoError(Exception):
    exit_code = 2


class ParseError(NullGeoError):
    """Syntax error in an expression; ``offset`` is a byte offset into the source."""

    exit_code = 1

    def __init__(self, message, offset=None, source=None):
        self.offset = offset
        self.source = source
        where = "" if offset is None else f" at byte {offset}"
        super().__init__(f"{message}{where}")


class UnknownIdentifierError(ParseError):
    def __init__(self, name, offset=None, source=None):
        self.name = name
        super().__init__(f"unknown identifier {name!r}", offset, source)


class DefinitionError(NullGeoError):
    """Malformed definition file; ``line`` is 1-based."""

    exit_code = 1

    def __init__(self, message, line=None):
        self.line = line
        where = "" if line is None else f"line {line}: "
        super().__init__(f"{where}{message}")


class DomainError(NullGeoError):
    """Non-finite value while evaluating an expression."""

    def __init__(self, message, point=None):
        self.point = None if point is None else tuple(float(p) for p in point)
        suffix = "" if point is None else f" at point {self.point}"
        super().__init__(f"{message}{suffix}")


class NoSolutionError(NullGeoError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"inconsistent linear system, residual {residual:.3e}")


class SingularMetricError(NullGeoError):
    pass


class ImmersionDegenerateError(NullGeoError):
    pass


class NotLightlikeError(NullGeoError):
    def __init__(self, rank, expected, point=None):
        self.rank = rank
        self.expected = expected
        self.point = point
        super().__init__(
            f"induced metric has rank {rank}, expected {expected}"
            + ("" if point is None else f" at {tuple(point)}")
        )


class ScreenDegenerateError(NullGeoError):
    pass


class NumericalDegeneracyError(NullGeoError):
    pass


class NotUmbilicalError(NullGeoError):
    pass


class NotApplicableError(NullGeoError):
    pass


class DegenerateKernelError(NullGeoError):
    pass


class LoopNotClosedError(NullGeoError):
    pass


class ToleranceError(NullGeoError):
    exit_code = 3


class ReconstructionInconsistentError(ToleranceError):
    pass
