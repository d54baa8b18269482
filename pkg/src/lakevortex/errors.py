"""Exception hierarchy.

Input problems (bad geometry, bad config, points outside the domain) derive
from ``InputError`` and map to CLI exit code 1; numerical failures derive from
``NumericalError`` and map to exit code 2.
"""


class LakeVortexError(Exception):
    pass


class InputError(LakeVortexError, ValueError):
    pass


class NumericalError(LakeVortexError, RuntimeError):
    pass


class DomainError(InputError):
    """Invalid domain geometry or a grid too coarse for it."""

    def __init__(self, message, island=None):
        super().__init__(message)
        self.island = island


class BathymetryError(InputError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ClearanceError(InputError):
    """A point is too close to a boundary (or to another vortex)."""


class ConfigError(InputError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DivergenceError(NumericalError):
    pass


class SimulationError(NumericalError):
    def __init__(self, message, last_state=None, vortex=None):
        super().__init__(message)
        self.last_state = last_state
        self.vortex = vortex
