"""Exception and warning types shared across the package.

Each error family maps onto one CLI exit code (see ``decwave.cli``).
"""


class DecWaveError(Exception):
    """Base class for every error raised by decwave."""


class ConfigError(DecWaveError, ValueError):
    """Invalid, incomplete or contradictory simulation configuration."""


class UnsupportedModelError(ConfigError):
    pass


class MeshError(DecWaveError, ValueError):
    """The mesh cannot be loaded or is unusable for the circumcentric scheme."""


class MeshParseError(MeshError):
    pass


class NonManifoldEdgeError(MeshError):
    pass


class DegenerateTriangleError(MeshError):
    pass


class IllShapedMeshError(MeshError):
    """A vertex has a non-positive dual area or stability radicand."""

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class SimulationOverflow(DecWaveError, ArithmeticError):
    """The time-stepped field left the representable/plausible range."""

    def __init__(self, message, time_index):
        super().__init__(message)
        self.time_index = time_index


class SolverError(DecWaveError):
    """Linear solve or eigenvalue iteration failed."""


class SingularSystemError(SolverError):
    pass


class IncompatibleRhsError(SolverError):
    pass


class NonWellCenteredWarning(UserWarning):
    """Some triangle does not contain its circumcenter."""


class StabilityWarning(UserWarning):
    """The requested time step exceeds the stability bound."""


class ConfigWarning(UserWarning):
    pass
