"""Exception hierarchy shared by the library and the command-line driver."""


class SolverError(Exception):
    """Base class. The driver exits with ``exit_code`` when one escapes."""

    exit_code = 1


class ConfigError(SolverError):
    exit_code = 2


class NumericError(SolverError):
    exit_code = 3


class OutputError(SolverError):
    exit_code = 4


class RootShortfallError(NumericError):
    """Fewer roots than requested were bracketed inside the scan window."""

    def __init__(self, found, requested, window):
        self.found = found
        self.requested = requested
        self.window = window
        super().__init__(
            "found {} of {} roots in scan window [{:.6g}, {:.6g}]".format(
                found, requested, window[0], window[1]
            )
        )


class HyperbolicOverflowError(NumericError):
    pass


class VolterraSingularError(NumericError):
    """Diagonal block of the discretized system is singular."""

    def __init__(self, node):
        self.node = node
        super().__init__("singular diagonal block at time node {}".format(node))


class PoleSingularityError(NumericError):
    """Spectral parameter sits on a zero of det Lambda*."""


class InversionInstabilityError(NumericError):
    pass


class QuadratureError(NumericError):
    pass


class TruncationError(NumericError):
    pass


class CFLViolationError(NumericError):
    pass


class BlowUpError(NumericError):
    pass


class TrajectoryError(NumericError):
    """A boundary trajectory left its admissible range or lost its ordering."""


class RootIterationError(NumericError):
    pass


class ValidationFailure(NumericError):
    pass
