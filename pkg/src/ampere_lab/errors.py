"""Exception hierarchy shared by every module of the lab."""


class LabError(Exception):
    """Base class for all errors raised by ampere_lab."""


class DomainError(LabError, ValueError):
    """Invalid grid domain, mask, or field shape."""


class FieldIOError(LabError, ValueError):
    """Malformed field file."""


class StructureError(LabError, ValueError):
    """Invalid almost complex structure or hermitian form."""


class HypothesisError(LabError, ValueError):
    """A mathematical precondition of an operation does not hold."""


class ConvergenceError(LabError, RuntimeError):
    """An iterative procedure failed to converge."""
