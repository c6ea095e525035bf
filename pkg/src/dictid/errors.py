"""Exception hierarchy.

Every domain failure raised by the library derives from :class:`DictIdError`
so the CLI can map it to a single exit code.
"""


class DictIdError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(DictIdError, ValueError):
    pass


class ZeroColumn(DictIdError, ValueError):
    def __init__(self, k):
        super().__init__(f"column {k} has (near) zero l2 norm")
        self.k = k


class NotUnitNorm(DictIdError, ValueError):
    pass


class SolverError(DictIdError, RuntimeError):
    """The simplex solver failed numerically; no result is trustworthy."""


class UnsupportedMode(DictIdError, ValueError):
    pass


class PreconditionFailed(DictIdError, ValueError):
    pass


class NotZeroDiagonal(DictIdError, ValueError):
    pass


class NotInNullSpace(DictIdError, ValueError):
    pass


class DegenerateDirection(DictIdError, ValueError):
    pass


class SingularPerturbedDictionary(DictIdError, ArithmeticError):
    pass


class EmptyGrid(DictIdError, ValueError):
    pass


class UnknownBoundId(DictIdError, KeyError):
    pass
