"""Exception and warning types raised across the package."""


class WavefieldError(ValueError):
    """Base class for rejected inputs."""


class DegenerateDomainError(WavefieldError):
    pass


class TooFewPointsError(WavefieldError):
    pass


class NonPositiveConstantError(WavefieldError):
    pass


class NormalizationError(WavefieldError):
    pass


class PotentialError(WavefieldError):
    pass


class SchemeMismatchError(WavefieldError):
    """Propagation scheme and boundary condition are incompatible."""


class PropagationError(RuntimeError):
    """A time step could not be carried out (solver breakdown, non-finite state)."""

    def __init__(self, message, time=None):
        if time is not None:
            message = f"{message} (t = {time:.17g})"
        super().__init__(message)
        self.time = time


class EigenSolverError(RuntimeError):
    pass


class UnwrapGuardError(WavefieldError):
    """Temporal phase change between bracketing snapshots reaches pi: reduce dt."""


class HistoryError(WavefieldError):
    pass


class ScenarioError(WavefieldError):
    """Invalid scenario document; carries the offending line/key when known."""

    def __init__(self, message, key=None, line=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.key = key
        self.line = line


class TruncationWarning(UserWarning):
    """Wave packet density at the domain boundary is not negligible."""


class MaskedProbabilityWarning(UserWarning):
    """Too much probability lies on masked points for an expectation value."""


class SurfaceTermWarning(UserWarning):
    """Q does not vanish at the domain edges, so the Ehrenfest surface term is not zero."""


class OutputError(OSError):
    """An output file or directory could not be written or read."""

    def __init__(self, message, path):
        super().__init__(f"{message}: {path}")
        self.path = str(path)
