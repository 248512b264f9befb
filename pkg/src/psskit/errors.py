"""Exception hierarchy. CLI exit codes hang off these classes."""


class PsskitError(Exception):
    exit_code = 1


class InputError(PsskitError, ValueError):
    exit_code = 2


class RelaxationOrderError(InputError):
    """Relaxation order too small for a generator or target degree."""


class SolverError(PsskitError, RuntimeError):
    exit_code = 3

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnboundedSetError(SolverError):
    """Raised when a bounding-box relaxation is unbounded."""


class SamplingError(PsskitError, RuntimeError):
    exit_code = 3


class DegenerateFiber(SamplingError):
    """The conditional density vanishes on a fiber; the caller should redraw."""


class CheckFailure(PsskitError):
    exit_code = 4
