"""Exception hierarchy shared by every module.

Each error carries the CLI exit code it maps to, so the command line layer
never has to guess.
"""

from __future__ import annotations


class ParauditError(Exception):
    exit_code = 1


class ConfigurationError(ParauditError, ValueError):
    exit_code = 2


class ParameterError(ConfigurationError):
    pass


class GeometryError(ParauditError, ValueError):
    """Band limits or alias rules violated for the chosen grid."""

    exit_code = 2

    def __init__(self, message: str, minimal_n: int | None = None):
        if minimal_n is not None:
            message = f"{message} (minimal admissible n = {minimal_n})"
        super().__init__(message)
        self.minimal_n = minimal_n


class ResolutionError(GeometryError):
    pass


class DomainError(ParauditError, ValueError):
    pass


class NormDomainError(DomainError):
    pass


class DegenerateSampleError(ParauditError):
    pass


class FitError(ParauditError):
    exit_code = 2


class ResourceError(ConfigurationError):
    pass
